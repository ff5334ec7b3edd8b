//! Exact identity checks between the configuration-space generator and its dual form.

use super::ops::{DualOp, Space};
use super::setfn::{transform, SetFunction};
use super::sets::Geometry;
use crate::error::Result;
use crate::local::{collision_generator, collision_generator_l1, exchange_generator, slot, LocalFunction};
use crate::model::{Torus, VelocityModel};
use crate::scalar::{Rational, Scalar};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub cases: usize,
    /// Largest |lhs - rhs| seen (zero when the identity holds exactly).
    pub max_defect: f64,
    pub passed: bool,
}

type Q = Rational;

/// Random local function with small integer values on at most `max_vars` slots near the origin.
pub fn random_local(model: &VelocityModel, torus: &Torus, rng: &mut impl Rng, max_vars: usize) -> LocalFunction<Q> {
    let nv = model.nv();
    let mut slots: Vec<u32> = Vec::new();
    for (dx, dy) in [(0, 0), (1, 0), (0, 1)] {
        for v in 0..nv {
            slots.push(slot(torus.site(dx, dy), v, nv));
        }
    }
    slots.shuffle(rng);
    let k = rng.gen_range(1..=max_vars.min(slots.len()));
    let mut vars = slots[..k].to_vec();
    vars.sort_unstable();
    let table = (0..1usize << k).map(|_| Q::from_int(rng.gen_range(-3..=3))).collect();
    LocalFunction::new(vars, table)
}

fn set_defect(a: &SetFunction<Q>, b: &SetFunction<Q>) -> f64 {
    a.sub(b).max_abs()
}

fn apply(f: &SetFunction<Q>, model: &VelocityModel, ops: &[DualOp]) -> Result<SetFunction<Q>> {
    let mut out = SetFunction::new(f.geo, f.flavor, Space::Sets);
    for &op in ops {
        out = out.add(&f.apply_dual(model, op, true)?);
    }
    Ok(out)
}

struct Tally {
    name: &'static str,
    cases: usize,
    defect: f64,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally { name, cases: 0, defect: 0.0 }
    }
    fn record(&mut self, d: f64) {
        self.cases += 1;
        self.defect = self.defect.max(d);
    }
    fn finish(self) -> IdentityCheck {
        IdentityCheck { name: self.name.into(), cases: self.cases, max_defect: self.defect, passed: self.cases > 0 && self.defect == 0.0 }
    }
}

/// Runs every identity over `cases` random local functions, in exact rational arithmetic.
pub fn structural_suite(model: &VelocityModel, side: usize, cases: usize, seed: u64) -> Result<Vec<IdentityCheck>> {
    let torus = Torus::new(side)?;
    let geo = Geometry::new(torus, model.nv());
    let reversed = model.reversed();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stationarity = Tally::new("stationarity");
    let mut collision_sym = Tally::new("collision_symmetry");
    let mut exchange_adj = Tally::new("exchange_adjoint");
    let mut parseval = Tally::new("parseval");
    let mut ex_intertwine = Tally::new("exchange_intertwining");
    let mut c1_intertwine = Tally::new("collision_intertwining");
    let mut antisym = Tally::new("jump_antisymmetry");
    let mut pairing = Tally::new("dual_inner_product");
    let mut s_degree1 = Tally::new("s_annihilates_degree1");
    let mut jminus_low = Tally::new("jminus_annihilates_degree2");
    for _ in 0..cases {
        let f = random_local(model, &torus, &mut rng, 3);
        let g = random_local(model, &torus, &mut rng, 3);

        // mean is linear, and the two parts separately keep the tables small
        let m = exchange_generator(model, &torus, &f).mean() + collision_generator(model, &f).mean();
        stationarity.record(m.to_f64().abs());

        let lhs = g.inner(&collision_generator(model, &f));
        let rhs = collision_generator(model, &g).inner(&f);
        collision_sym.record((lhs - rhs).to_f64().abs());

        let lhs = g.inner(&exchange_generator(model, &torus, &f));
        let rhs = exchange_generator(&reversed, &torus, &g).inner(&f);
        exchange_adj.record((lhs - rhs).to_f64().abs());

        let (tf, tg) = (transform(&f, geo), transform(&g, geo));
        parseval.record((f.inner(&g) - tf.parseval_inner(&tg)).to_f64().abs());

        let lhs = transform(&exchange_generator(model, &torus, &f), geo);
        let rhs = apply(&tf, model, &[DualOp::S, DualOp::Jplus, DualOp::Jminus])?;
        ex_intertwine.record(set_defect(&lhs, &rhs));

        let lhs = transform(&collision_generator_l1(model, &f), geo);
        let rhs = tf.apply_dual(model, DualOp::Lc1, true)?;
        c1_intertwine.record(set_defect(&lhs, &rhs));

        let (cf, cg) = (tf.to_classes(), tg.to_classes());
        let jf = apply(&cf, model, &[DualOp::Jplus, DualOp::Jminus])?;
        let jg = apply(&cg, model, &[DualOp::Jplus, DualOp::Jminus])?;
        antisym.record((jf.dual_inner_product(&cg) + cf.dual_inner_product(&jg)).to_f64().abs());

        pairing.record((cf.dual_inner_product(&cg) - f.torus_pairing(&g, &torus, model.nv())).to_f64().abs());

        let one = cf.degree_part(1);
        s_degree1.record(one.apply_dual(model, DualOp::S, true)?.max_abs());
        let low = SetFunction { entries: cf.entries.iter().filter(|(k, _)| k.len() <= 2).map(|(k, v)| (k.clone(), *v)).collect(), ..cf.clone() };
        jminus_low.record(low.apply_dual(model, DualOp::Jminus, true)?.max_abs());
    }
    Ok([stationarity, collision_sym, exchange_adj, parseval, ex_intertwine, c1_intertwine, antisym, pairing, s_degree1, jminus_low]
        .into_iter()
        .map(Tally::finish)
        .collect())
}
