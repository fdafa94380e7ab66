use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use super::{
    normalize_heading, PointCloud, Pose, Scenario, SceneError, Trajectory, VehicleId, DEFAULT_V_MAX,
};

const HEADER: [&str; 6] = ["vehicle_id", "t", "x", "y", "z", "heading"];
const NODE_SNAP: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ImportOptions {
    pub scenario_id: String,
    /// Resampling step. `None` uses the smallest sample spacing in the file.
    pub dt: Option<f64>,
    /// Receiver. `None` picks the lowest vehicle id.
    pub ego: Option<VehicleId>,
    pub v_max: f64,
}

impl Default for ImportOptions {
    fn default() -> Self {
        Self {
            scenario_id: "imported".into(),
            dt: None,
            ego: None,
            v_max: DEFAULT_V_MAX,
        }
    }
}

struct Row {
    t: f64,
    pose: Pose,
}

pub fn import_trajectories_from_path(
    path: impl AsRef<Path>,
    opts: &ImportOptions,
) -> Result<Scenario, SceneError> {
    let file = std::fs::File::open(path)?;
    import_trajectories(file, opts)
}

/// Reads a `vehicle_id,t,x,y,z,heading` CSV and resamples every vehicle onto
/// a shared grid by linear interpolation. The grid spans the window where
/// all vehicles have data.
pub fn import_trajectories<R: Read>(
    reader: R,
    opts: &ImportOptions,
) -> Result<Scenario, SceneError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers().map_err(|e| parse_err(1, e))?.clone();
    if headers.iter().ne(HEADER.iter().copied()) {
        return Err(SceneError::Parse {
            line: 1,
            message: format!("expected header `{}`", HEADER.join(",")),
        });
    }

    let mut per_vehicle: BTreeMap<VehicleId, Vec<Row>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e)
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<f64, SceneError> {
            let raw = &record[i];
            let v: f64 = raw.parse().map_err(|_| SceneError::Parse {
                line,
                message: format!("column `{}`: cannot parse `{raw}` as a number", HEADER[i]),
            })?;
            if !v.is_finite() {
                return Err(SceneError::Parse {
                    line,
                    message: format!("column `{}` is not finite", HEADER[i]),
                });
            }
            Ok(v)
        };
        let id: u32 = record[0].parse().map_err(|_| SceneError::Parse {
            line,
            message: format!("vehicle_id `{}` is not a non-negative integer", &record[0]),
        })?;
        let vehicle = VehicleId(id);
        let t = field(1)?;
        let pose = Pose::new(field(2)?, field(3)?, field(4)?, field(5)?);
        let rows = per_vehicle.entry(vehicle).or_default();
        if let Some(prev) = rows.last() {
            if t <= prev.t {
                return Err(SceneError::InconsistentVehicle {
                    vehicle,
                    line,
                    message: format!("timestamp {t} does not increase past {}", prev.t),
                });
            }
        }
        rows.push(Row { t, pose });
    }

    if per_vehicle.is_empty() {
        return Err(SceneError::InvalidParameter("no trajectory rows".into()));
    }
    if let Some((id, _)) = per_vehicle.iter().find(|(_, rows)| rows.len() < 2) {
        return Err(SceneError::InvalidParameter(format!(
            "vehicle {id} has fewer than 2 samples"
        )));
    }

    let dt = match opts.dt {
        Some(dt) if dt > 0.0 && dt.is_finite() => dt,
        Some(dt) => {
            return Err(SceneError::InvalidParameter(format!(
                "dt must be positive, got {dt}"
            )))
        }
        None => per_vehicle
            .values()
            .flat_map(|rows| rows.windows(2).map(|w| w[1].t - w[0].t))
            .fold(f64::INFINITY, f64::min),
    };

    let t0 = per_vehicle
        .values()
        .map(|r| r[0].t)
        .fold(f64::NEG_INFINITY, f64::max);
    let t1 = per_vehicle
        .values()
        .map(|r| r[r.len() - 1].t)
        .fold(f64::INFINITY, f64::min);
    if t1 - t0 < dt - NODE_SNAP {
        return Err(SceneError::InvalidParameter(format!(
            "vehicles share less than one step of data (window {t0}..{t1})"
        )));
    }
    let samples = ((t1 - t0) / dt + NODE_SNAP).floor() as usize + 1;

    let mut trajectories = Vec::with_capacity(per_vehicle.len());
    for (vehicle, rows) in &per_vehicle {
        let poses = (0..samples)
            .map(|i| interpolate(rows, t0 + i as f64 * dt))
            .collect();
        let tr = Trajectory::new(*vehicle, dt, poses)?;
        if !tr.respects_speed_limit(opts.v_max) {
            return Err(SceneError::InvalidParameter(format!(
                "vehicle {vehicle} exceeds {} m/s after resampling",
                opts.v_max
            )));
        }
        trajectories.push(tr);
    }

    let ego = opts
        .ego
        .unwrap_or_else(|| *per_vehicle.keys().next().expect("non-empty"));
    Scenario::new(
        opts.scenario_id.clone(),
        trajectories,
        ego,
        PointCloud::default(),
        0,
    )
}

fn parse_err(line: u64, e: csv::Error) -> SceneError {
    SceneError::Parse {
        line,
        message: e.to_string(),
    }
}

fn interpolate(rows: &[Row], t: f64) -> Pose {
    // index of the first row with time > t
    let hi = rows.partition_point(|r| r.t <= t);
    if hi == 0 {
        return rows[0].pose;
    }
    let lo = &rows[hi - 1];
    if (t - lo.t).abs() <= NODE_SNAP || hi == rows.len() {
        return lo.pose;
    }
    let next = &rows[hi];
    if (next.t - t).abs() <= NODE_SNAP {
        return next.pose;
    }
    let a = (t - lo.t) / (next.t - lo.t);
    let lerp = |p: f64, q: f64| p + a * (q - p);
    let dh = normalize_heading(next.pose.heading - lo.pose.heading);
    Pose::new(
        lerp(lo.pose.x, next.pose.x),
        lerp(lo.pose.y, next.pose.y),
        lerp(lo.pose.z, next.pose.z),
        lo.pose.heading + a * dh,
    )
}
