//! Usage-based metering of served open-stack frames and multi-party
//! settlement. Money is held in integer minor units throughout.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::obfuscation::Priority;
use crate::scene::VehicleId;
use crate::scheduler::FrameLedger;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BillingError {
    #[error("invalid tariff: {0}")]
    InvalidTariff(String),
    #[error("invalid period [{0}, {1})")]
    InvalidPeriod(f64, f64),
}

/// Amount in minor currency units (cents).
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Money(pub i64);

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl std::iter::Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money(0), Add::add)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let v = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", v / 100, v % 100)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tariff {
    pub unit_cost: Money,
    /// Applied to elevated requests; the product is rounded to whole
    /// minor units once, so every elevated item costs the same.
    pub priority_multiplier: f64,
    pub subscription_flat: Money,
}

impl Tariff {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.unit_cost.0 < 0 {
            out.push(format!(
                "Tariff.unit_cost must be non-negative, got {}",
                self.unit_cost.0
            ));
        }
        if !(self.priority_multiplier >= 1.0 && self.priority_multiplier.is_finite()) {
            out.push(format!(
                "Tariff.priority_multiplier must be finite and >= 1, got {}",
                self.priority_multiplier
            ));
        }
        if self.subscription_flat.0 < 0 {
            out.push(format!(
                "Tariff.subscription_flat must be non-negative, got {}",
                self.subscription_flat.0
            ));
        }
        out
    }

    pub fn price(&self, priority: Priority) -> Money {
        match priority {
            Priority::Normal => self.unit_cost,
            Priority::Elevated => {
                Money((self.unit_cost.0 as f64 * self.priority_multiplier).round() as i64)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineItem {
    pub t: f64,
    pub priority: Priority,
    pub amount: Money,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invoice {
    /// Payer.
    pub recipient: VehicleId,
    /// Payee, the vehicle whose sensor served the frames.
    pub sharer: VehicleId,
    pub period: (f64, f64),
    pub subscription_flat: Money,
    pub line_items: Vec<LineItem>,
    pub total: Money,
}

/// One invoice per recipient that was served in `[start, end)` or is listed
/// in `subscribers`. Line items are stamped with the delivery time.
pub fn meter(
    ledger: &FrameLedger,
    tariff: &Tariff,
    period: (f64, f64),
    sharer: VehicleId,
    subscribers: &[VehicleId],
) -> Result<Vec<Invoice>, BillingError> {
    let problems = tariff.violations();
    if !problems.is_empty() {
        return Err(BillingError::InvalidTariff(problems.join("; ")));
    }
    let (start, end) = period;
    if !(start <= end) {
        return Err(BillingError::InvalidPeriod(start, end));
    }

    let mut items: BTreeMap<VehicleId, Vec<LineItem>> =
        subscribers.iter().map(|&r| (r, Vec::new())).collect();
    for frame in ledger
        .frames
        .iter()
        .filter(|f| (start..end).contains(&f.t_produced))
    {
        for req in &frame.served_requests {
            items.entry(req.recipient).or_default().push(LineItem {
                t: frame.t_produced,
                priority: req.priority,
                amount: tariff.price(req.priority),
            });
        }
    }

    Ok(items
        .into_iter()
        .map(|(recipient, line_items)| {
            let total = tariff.subscription_flat + line_items.iter().map(|i| i.amount).sum();
            Invoice {
                recipient,
                sharer,
                period,
                subscription_flat: tariff.subscription_flat,
                line_items,
                total,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettlementMatrix {
    pub payers: Vec<VehicleId>,
    pub payees: Vec<VehicleId>,
    /// `amounts[i][j]` owed by `payers[i]` to `payees[j]`.
    pub amounts: Vec<Vec<Money>>,
}

impl SettlementMatrix {
    pub fn total(&self) -> Money {
        self.amounts.iter().flatten().copied().sum()
    }

    pub fn row_sum(&self, i: usize) -> Money {
        self.amounts[i].iter().copied().sum()
    }

    pub fn column_sum(&self, j: usize) -> Money {
        self.amounts.iter().map(|r| r[j]).sum()
    }

    pub fn owed(&self, payer: VehicleId, payee: VehicleId) -> Money {
        match (
            self.payers.binary_search(&payer),
            self.payees.binary_search(&payee),
        ) {
            (Ok(i), Ok(j)) => self.amounts[i][j],
            _ => Money(0),
        }
    }

    /// `payer,payee,amount` rows in minor units, zero entries omitted.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("payer,payee,amount_minor\n");
        for (i, payer) in self.payers.iter().enumerate() {
            for (j, payee) in self.payees.iter().enumerate() {
                if self.amounts[i][j].0 != 0 {
                    out.push_str(&format!("{payer},{payee},{}\n", self.amounts[i][j].0));
                }
            }
        }
        out
    }
}

pub fn settle(invoices: &[Invoice]) -> SettlementMatrix {
    let payers: Vec<VehicleId> = invoices
        .iter()
        .map(|i| i.recipient)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let payees: Vec<VehicleId> = invoices
        .iter()
        .map(|i| i.sharer)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut amounts = vec![vec![Money(0); payees.len()]; payers.len()];
    for inv in invoices {
        let i = payers
            .binary_search(&inv.recipient)
            .expect("collected above");
        let j = payees.binary_search(&inv.sharer).expect("collected above");
        amounts[i][j] += inv.total;
    }
    SettlementMatrix {
        payers,
        payees,
        amounts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obfuscation::StackTag;
    use crate::scheduler::{FrameRecord, ServedRequest};

    fn ledger(requests: &[(u32, Priority)]) -> FrameLedger {
        FrameLedger {
            frames: requests
                .iter()
                .enumerate()
                .map(|(i, &(r, priority))| FrameRecord {
                    t_produced: i as f64 * 0.2 + 0.04,
                    stack: StackTag::Open,
                    served_requests: vec![ServedRequest {
                        recipient: VehicleId(r),
                        priority,
                        requested_at: i as f64 * 0.2,
                    }],
                    e2e_latency: 0.04,
                })
                .collect(),
            unserved: vec![],
        }
    }

    fn tariff(unit: i64, mult: f64, flat: i64) -> Tariff {
        Tariff {
            unit_cost: Money(unit),
            priority_multiplier: mult,
            subscription_flat: Money(flat),
        }
    }

    const ALL: (f64, f64) = (0.0, 1e9);

    #[test]
    fn hundred_normal_and_elevated() {
        let l = ledger(&vec![(1, Priority::Normal); 100]);
        let inv = meter(&l, &tariff(100, 2.0, 0), ALL, VehicleId(0), &[]).unwrap();
        assert_eq!(inv.len(), 1);
        assert_eq!(inv[0].total, Money(10_000));

        let l = ledger(&vec![(1, Priority::Elevated); 100]);
        let inv = meter(&l, &tariff(100, 2.0, 0), ALL, VehicleId(0), &[]).unwrap();
        assert_eq!(inv[0].total, Money(20_000));
    }

    #[test]
    fn flat_fee_only() {
        let subs = [VehicleId(1), VehicleId(2), VehicleId(3)];
        let inv = meter(
            &FrameLedger::default(),
            &tariff(100, 1.0, 500),
            ALL,
            VehicleId(0),
            &subs,
        )
        .unwrap();
        assert_eq!(inv.len(), 3);
        assert!(inv
            .iter()
            .all(|i| i.total == Money(500) && i.line_items.is_empty()));
    }

    #[test]
    fn period_filters_items() {
        let l = ledger(&[(1, Priority::Normal); 10]);
        let inv = meter(&l, &tariff(1, 1.0, 0), (0.0, 1.0), VehicleId(0), &[]).unwrap();
        assert_eq!(inv[0].line_items.len(), 5);
    }

    #[test]
    fn settlement_sums() {
        let mut invoices = Vec::new();
        for sharer in [10, 11] {
            let l = ledger(&[
                (1, Priority::Normal),
                (2, Priority::Elevated),
                (2, Priority::Normal),
            ]);
            invoices.extend(meter(&l, &tariff(100, 1.5, 7), ALL, VehicleId(sharer), &[]).unwrap());
        }
        let m = settle(&invoices);
        assert_eq!(m.payers, vec![VehicleId(1), VehicleId(2)]);
        assert_eq!(m.payees, vec![VehicleId(10), VehicleId(11)]);
        assert_eq!(m.owed(VehicleId(2), VehicleId(10)), Money(7 + 150 + 100));
        assert_eq!(m.column_sum(0), Money(107 + 257));
        assert_eq!(m.total(), invoices.iter().map(|i| i.total).sum());
        assert_eq!(m.row_sum(1), Money(2 * 257));
    }

    #[test]
    fn single_pair() {
        let l = ledger(&vec![(1, Priority::Normal); 100]);
        let m = settle(&meter(&l, &tariff(1, 1.0, 0), ALL, VehicleId(0), &[]).unwrap());
        assert_eq!(m.amounts, vec![vec![Money(100)]]);
    }

    #[test]
    fn rejects_bad_tariff() {
        assert!(meter(
            &FrameLedger::default(),
            &tariff(-1, 0.5, 0),
            ALL,
            VehicleId(0),
            &[]
        )
        .is_err());
        assert_eq!(tariff(-1, 0.5, -2).violations().len(), 3);
    }

    #[test]
    fn money_display() {
        assert_eq!(Money(12345).to_string(), "123.45");
        assert_eq!(Money(-5).to_string(), "-0.05");
    }
}
