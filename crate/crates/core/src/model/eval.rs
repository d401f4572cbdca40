use thiserror::Error;

use super::ir::*;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{transition}: `{slot}` := {value} is outside [{min}, {max}]")]
pub struct RangeError {
    pub transition: String,
    pub slot: String,
    pub value: i64,
    pub min: i32,
    pub max: i32,
}

impl ComposedModel {
    pub fn eval(&self, e: &Expr, s: &[i32]) -> i64 {
        match e {
            Expr::Const(v) => *v,
            Expr::Slot(i) => s[*i] as i64,
            Expr::Not(a) => (self.eval(a, s) == 0) as i64,
            Expr::And(es) => es.iter().all(|e| self.eval(e, s) != 0) as i64,
            Expr::Or(es) => es.iter().any(|e| self.eval(e, s) != 0) as i64,
            Expr::Cmp(op, a, b) => op.apply(self.eval(a, s), self.eval(b, s)) as i64,
            Expr::Add(a, b) => self.eval(a, s).wrapping_add(self.eval(b, s)),
            Expr::Mul(a, b) => self.eval(a, s).wrapping_mul(self.eval(b, s)),
            Expr::Ite(c, a, b) => {
                if self.eval(c, s) != 0 {
                    self.eval(a, s)
                } else {
                    self.eval(b, s)
                }
            }
            Expr::Allowed(sv, v) => {
                let meta = &self.svs[*sv];
                meta.info.allowed(s[meta.slot] as i64, self.eval(v, s)) as i64
            }
        }
    }

    pub fn holds(&self, e: &Expr, s: &[i32]) -> bool {
        self.eval(e, s) != 0
    }

    /// Source location matches and the guard holds.
    pub fn is_enabled(&self, t: TransId, s: &[i32]) -> bool {
        let tr = &self.transitions[t];
        s[self.processes[tr.process].loc_slot] as usize == tr.from && self.holds(&tr.guard, s)
    }

    /// Enabled transitions of process `p`, in declaration order.
    pub fn enabled_in<'a>(&'a self, p: ProcId, s: &'a [i32]) -> impl Iterator<Item = TransId> + 'a {
        let loc = s[self.processes[p].loc_slot] as usize;
        self.processes[p].outgoing[loc].iter().copied().filter(move |&t| self.holds(&self.transitions[t].guard, s))
    }

    /// Apply effects in order, then move the process. Provider calls are the
    /// caller's business.
    pub fn apply(&self, t: TransId, s: &mut [i32]) -> Result<(), RangeError> {
        let tr = &self.transitions[t];
        for (slot, e) in &tr.effects {
            let v = self.eval(e, s);
            self.write(t, *slot, v, s)?;
        }
        s[self.processes[tr.process].loc_slot] = tr.to as i32;
        Ok(())
    }

    /// Range-checked slot write, attributed to transition `t` on failure.
    pub fn write(&self, t: TransId, slot: SlotId, v: i64, s: &mut [i32]) -> Result<(), RangeError> {
        let info = &self.slots[slot];
        if v < info.min as i64 || v > info.max as i64 {
            return Err(RangeError {
                transition: self.transition_label(t),
                slot: info.name.clone(),
                value: v,
                min: info.min,
                max: info.max,
            });
        }
        s[slot] = v as i32;
        Ok(())
    }
}
