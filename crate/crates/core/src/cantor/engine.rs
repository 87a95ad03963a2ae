//! Level-by-level construction.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::offspring::{self, Offspring};
use super::verify::{separation_stats, verify_level};
use super::{
    AnnulusRecord, ConstructionConfig, ConstructionTrace, GrowthFloor, KbRow, LevelParams, LevelReport, LevelSet, Mode,
    NComponent, TailCertificate, TRACE_FORMAT,
};
use crate::certified::{pow_enclosure, CertifiedValue};
use crate::error::{Error, Result};
use crate::psi::{tail_sum_bound, ApproxFunction};
use crate::rational::Rational;
use crate::space::{annulus_measure, Ball, MetricMeasureSpace, Point, SpaceKind};
use crate::wds::{WdsPoint, WdsSystem};

/// Random root balls tried before giving up.
pub const ROOT_ATTEMPTS: u32 = 16;
/// Doublings of `N_{l+1}` allowed when a parent runs short of children.
pub const REFINE_RETRIES: u32 = 4;
/// Rungs of the per-annulus distribution ladder checked above its floor.
pub const LADDER_RUNGS: u32 = 6;
/// Longest stride of the ladder search, in doublings.
pub const GALLOP_STRIDE: u64 = 4;
/// Screened-off candidates tolerated per kept child.
pub const MAX_SKIPS: usize = 64;

/// Incremental construction of a trace.
pub struct Builder {
    cfg: ConstructionConfig,
    space: MetricMeasureSpace,
    system: WdsSystem,
    psi: ApproxFunction,
    trace: ConstructionTrace,
}

/// Children kept for one parent, with the census of all admissible ones.
struct Brood {
    kept: Vec<WdsPoint>,
    census: Offspring,
    skipped: usize,
}

/// Outcome of probing one root ball.
struct RootProbe {
    kb: Option<BigInt>,
    rows: Vec<KbRow>,
    points: Vec<WdsPoint>,
}

/// Run the whole construction with per-level verification.
pub fn build(cfg: &ConstructionConfig) -> Result<ConstructionTrace> {
    let mut b = Builder::new(cfg.clone())?;
    b.build_first_level()?;
    b.check_last_level()?;
    while b.depth() < cfg.levels {
        let params = b.select_next_n()?;
        b.refine_level(params)?;
        b.check_last_level()?;
    }
    Ok(b.finish())
}

fn ceil_pow2(x: &Rational) -> BigInt {
    let v = x.ceil().max(BigInt::one());
    let b = (&v - 1u32).bits();
    BigInt::one() << b
}

fn rat(n: &BigInt) -> Rational {
    Rational::from_integer(n.clone())
}

pub(crate) fn band_delta(cfg: &ConstructionConfig, n: &BigInt) -> Result<Rational> {
    let c = &cfg.c;
    let gap = (c.pow(2) * rat(n)).recip();
    let psi = cfg.psi.eval(&(c / rat(n)))?.hi;
    Ok((gap - Rational::from(2) * psi) / Rational::from(3))
}

impl Builder {
    pub fn new(cfg: ConstructionConfig) -> Result<Self> {
        if cfg.space != SpaceKind::Circle {
            return Err(Error::Unsupported(format!(
                "constructions run on the circle, not {}",
                cfg.space
            )));
        }
        if !cfg.alpha.is_positive() || !cfg.beta.is_positive() {
            return Err(Error::Config("alpha and beta must be positive".into()));
        }
        if cfg.c < Rational::one() {
            return Err(Error::Config(format!(
                "the system constant must be at least 1, got {}",
                cfg.c
            )));
        }
        if cfg.levels == 0 {
            return Err(Error::Config("at least one level is required".into()));
        }
        if !cfg.dimension_slack.is_positive() || cfg.dimension_slack >= Rational::one() {
            return Err(Error::Config("dimension slack must lie in (0, 1)".into()));
        }
        if cfg.branching < 2 {
            return Err(Error::Config("branching must be at least 2".into()));
        }
        let sigma = &cfg.alpha * (&cfg.psi.tau - Rational::one());
        if sigma <= Rational::one() {
            return Err(Error::HypothesisViolated(format!(
                "sum of (psi(R)/R)^alpha diverges for {} with alpha = {}: need tau > 1 + 1/alpha",
                cfg.psi, cfg.alpha
            )));
        }
        let space = cfg.space();
        let system = cfg.wds();
        let psi = cfg.psi.clone();
        let trace = ConstructionTrace {
            format: TRACE_FORMAT.to_string(),
            config: cfg.clone(),
            root: Ball::new(Rational::zero(), Rational::zero()),
            root_attempts: 0,
            kb: None,
            kb_audit: Vec::new(),
            levels: Vec::new(),
            verification: Vec::new(),
            tail_certificates: Vec::new(),
            warnings: Vec::new(),
        };
        Ok(Builder {
            cfg,
            space,
            system,
            psi,
            trace,
        })
    }

    pub fn depth(&self) -> usize {
        self.trace.levels.len()
    }

    pub fn trace(&self) -> &ConstructionTrace {
        &self.trace
    }

    pub fn finish(self) -> ConstructionTrace {
        self.trace
    }

    fn bits(&self) -> u32 {
        self.psi.precision_bits
    }

    /// `x^e`, exact for integral exponents.
    fn powr(&self, x: &Rational, e: &Rational) -> CertifiedValue {
        if e.is_integer() {
            if let Some(k) = e.numer().to_i32() {
                return CertifiedValue::exact(x.pow(k));
            }
        }
        pow_enclosure(x, e, self.bits())
    }

    /// Enclosure of `v^e` for an enclosure `v` of a positive value.
    fn cv_pow(&self, v: &CertifiedValue, e: &Rational) -> CertifiedValue {
        if e.is_zero() {
            return CertifiedValue::exact(Rational::one());
        }
        let at = |x: &Rational| {
            if x.is_zero() {
                CertifiedValue::exact(Rational::zero())
            } else {
                self.powr(x, e)
            }
        };
        if e.is_positive() {
            CertifiedValue::new(at(&v.lo).lo, at(&v.hi).hi)
        } else {
            CertifiedValue::new(self.powr(&v.hi, e).lo, self.powr(&v.lo, e).hi)
        }
    }

    fn c3(&self) -> Rational {
        self.cfg.c.pow(3)
    }

    fn check_bits(&self, n: &BigInt, what: &str) -> Result<()> {
        if n.bits() > self.cfg.max_n_bits {
            return Err(Error::ResourceLimit(format!(
                "{what} needs {} bits, above the cap of {}",
                n.bits(),
                self.cfg.max_n_bits
            )));
        }
        Ok(())
    }

    /// `(1−c_l)^β / ((8C³)^(2α+3) c_l^(β−α))`.
    pub fn tail_rhs(&self, l: usize) -> CertifiedValue {
        let (a, b) = (&self.cfg.alpha, &self.cfg.beta);
        let c_l = ConstructionConfig::c_of_level(l);
        let num = self.powr(&(Rational::one() - &c_l), b);
        let eight = Rational::from(8) * self.c3();
        let d1 = self.powr(&eight, &(a * Rational::from(2) + Rational::from(3)));
        let d2 = self.powr(&c_l, &(b - a));
        let den = d1.mul_nonneg(&d2);
        CertifiedValue::new(&num.lo / &den.hi, &num.hi / &den.lo)
    }

    /// `n_{l+1} = (1/(2C²)) c_l^(α−β) (1−c_l)^β`.
    pub fn child_density(&self, l: usize) -> CertifiedValue {
        let (a, b) = (&self.cfg.alpha, &self.cfg.beta);
        let c_l = ConstructionConfig::c_of_level(l);
        let k = (Rational::from(2) * self.cfg.c.pow(2)).recip();
        self.powr(&c_l, &(a - b))
            .mul_nonneg(&self.powr(&(Rational::one() - &c_l), b))
            .scale(&k)
    }

    pub fn tail_certificate(&self, l: usize, n: &BigInt) -> Result<TailCertificate> {
        let threshold = &self.cfg.c / rat(n);
        let bound = tail_sum_bound(&self.system, &self.psi, &self.cfg.alpha, &threshold)?;
        let rhs = self.tail_rhs(l);
        let passed = bound.hi < rhs.lo;
        Ok(TailCertificate {
            l,
            threshold,
            bound,
            rhs,
            passed,
        })
    }

    /// Least `N` (to the resolution of the search) whose certified tail sum
    /// below `C/N` drops under the level-`l` bound.
    pub fn tail_floor(&self, l: usize) -> Result<BigInt> {
        let passes = |n: &BigInt| -> Result<bool> { Ok(self.tail_certificate(l, n)?.passed) };
        let mut bad = BigInt::zero();
        let mut good = BigInt::one();
        while !passes(&good)? {
            bad = good.clone();
            good <<= 8;
            if good.bits() > self.cfg.max_n_bits {
                return Err(Error::HypothesisViolated(format!(
                    "tail sum at level {l} stays above its bound for every N within {} bits",
                    self.cfg.max_n_bits
                )));
            }
        }
        while &good - &bad > BigInt::one() {
            let mid: BigInt = (&good + &bad) >> 1;
            if passes(&mid)? {
                good = mid;
            } else {
                bad = mid;
            }
        }
        Ok(good)
    }

    /// The two growth-floor terms for `N_l`: the first needs `n_l` and
    /// `N_{l−1}`, the second `n_{l+1}`.
    pub fn growth_terms(
        &self,
        prev: Option<(&CertifiedValue, &BigInt)>,
        n_next: &CertifiedValue,
    ) -> Result<(Option<BigInt>, BigInt)> {
        let eps = &self.cfg.dimension_slack;
        let a = &self.cfg.alpha;
        let c = &self.cfg.c;
        let term1 = match prev {
            None => None,
            Some((n_l, n_prev)) => {
                let dens = self.cv_pow(n_l, &-(a.recip()));
                let psi = self.psi.eval(&(c * rat(n_prev)).recip())?;
                let base = c * &dens.hi * psi.lo.recip();
                let e = Rational::from(2) / eps;
                Some(self.powr(&base, &e).hi.ceil())
            }
        };
        let six = Rational::from(6) * c.pow(2);
        let base = &self.powr(&six, a).hi / &n_next.lo;
        let e = Rational::from(2) * (Rational::one() - eps) / (a * eps);
        let term2 = self.powr(&base, &e).hi.ceil();
        Ok((term1, term2))
    }

    fn growth_floor(
        &self,
        n: &BigInt,
        prev: Option<(&CertifiedValue, &BigInt)>,
        n_next: &CertifiedValue,
    ) -> Result<GrowthFloor> {
        let (term1, term2) = self.growth_terms(prev, n_next)?;
        let satisfied = n >= &term2 && term1.as_ref().is_none_or(|t| n >= t);
        Ok(GrowthFloor {
            term1,
            term2,
            satisfied,
            enforced: self.cfg.mode == Mode::Strict,
        })
    }

    /// `(1/C) k^α μ`, rounded up.
    fn required_count(&self, k: &BigInt, measure: &Rational) -> Rational {
        &self.powr(&rat(k), &self.cfg.alpha).hi * measure / &self.cfg.c
    }

    /// Least rung from which every higher rung passes.
    fn ladder_floor(rows: &[KbRow]) -> Option<BigInt> {
        let mut best = None;
        for row in rows.iter().rev() {
            if !row.passed {
                break;
            }
            best = Some(row.k.clone());
        }
        best
    }

    fn probe_root(&self, root: &Ball, n1: &BigInt) -> Result<std::result::Result<RootProbe, String>> {
        let points = self.system.enumerate_band(root, n1)?;
        let mu = self.space.ball_measure(root);
        let floor = self.required_count(n1, &mu);
        let need = floor.ceil().max(BigInt::from(2));
        if BigInt::from(points.len()) < need {
            return Ok(Err(format!(
                "root ball B({}, {}) holds {} points of band {n1}, need {need}",
                root.center,
                root.radius,
                points.len()
            )));
        }
        let ks: Vec<BigInt> = (-3i32..=6)
            .map(|i| if i < 0 { n1 >> (-i) as usize } else { n1 << i as usize })
            .filter(|k| k.is_positive())
            .collect();
        let rows = ks
            .par_iter()
            .map(|k| {
                let observed = self.system.enumerate_band(root, k)?.len();
                let required = self.required_count(k, &mu);
                let passed = required <= observed as i64;
                Ok(KbRow {
                    k: k.clone(),
                    observed,
                    required,
                    passed,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let kb = Self::ladder_floor(&rows);
        if kb.as_ref().is_none_or(|k| k > n1) {
            return Ok(Err(format!(
                "distribution ladder on B({}, {}) does not settle by band {n1}",
                root.center, root.radius
            )));
        }
        Ok(Ok(RootProbe { kb, rows, points }))
    }

    fn annulus_of(&self, p: WdsPoint, c: &Rational, parent: Option<usize>) -> Result<AnnulusRecord> {
        let psi = self.psi.eval(&p.radius)?;
        let inner = c * &psi.hi;
        let outer = psi.lo;
        if inner > outer {
            return Err(Error::PrecisionExhausted {
                bits: self.bits(),
                what: format!("annulus radii around {}", p.point),
            });
        }
        Ok(AnnulusRecord {
            center: p,
            inner,
            outer,
            parent,
            offspring: None,
        })
    }

    fn level_from(&self, params: LevelParams, annuli: Vec<AnnulusRecord>) -> Result<LevelSet> {
        let stats = separation_stats(&self.space, &self.psi, &annuli)?;
        let delta_band = self.band_delta(&params.n)?;
        Ok(LevelSet {
            t: annuli.len(),
            annuli,
            delta: stats.map(|s| s.delta).unwrap_or_else(|| Rational::new(1, 6)),
            delta_band,
            params,
            m_observed: None,
            m_certified: None,
            skipped: 0,
            short_parents: 0,
        })
    }

    /// Level one: every band-`n` point whose ball fits in `root`. Does not
    /// touch the builder's trace.
    pub fn first_level_at(&self, root: &Ball, n: &BigInt) -> Result<LevelSet> {
        let points = self.system.enumerate_band(root, n)?;
        let mu = self.space.ball_measure(root);
        let floor = self.required_count(n, &mu);
        let need = floor.ceil().max(BigInt::from(2));
        if BigInt::from(points.len()) < need {
            return Err(Error::DistributionFailure(format!(
                "root ball B({}, {}) holds {} points of band {n}, need {need}",
                root.center,
                root.radius,
                points.len()
            )));
        }
        let eps = self.psi.threshold_for_ratio(&(Rational::from(4) * self.c3()).recip());
        self.level_one(root, n, points, eps, Vec::new())
    }

    fn level_one(
        &self,
        root: &Ball,
        n: &BigInt,
        points: Vec<WdsPoint>,
        eps: Rational,
        components: Vec<NComponent>,
    ) -> Result<LevelSet> {
        let mu = self.space.ball_measure(root);
        let floor = self.required_count(n, &mu);
        let chosen = points;
        let c1 = ConstructionConfig::c_of_level(1);
        let annuli = chosen
            .into_iter()
            .map(|p| self.annulus_of(p, &c1, None))
            .collect::<Result<Vec<_>>>()?;
        let n_next = self.child_density(1);
        let growth_floor = self.growth_floor(n, None, &n_next)?;
        let params = LevelParams {
            l: 1,
            n: n.clone(),
            eps,
            c: c1,
            n_next,
            m_required: floor,
            target: annuli.len(),
            components,
            growth_floor,
            retries: 0,
        };
        self.level_from(params, annuli)
    }

    /// Choose `N_1` and the root ball, then form level one.
    pub fn build_first_level(&mut self) -> Result<&LevelSet> {
        if !self.trace.levels.is_empty() {
            return Err(Error::Config("level one already built".into()));
        }
        let c = self.cfg.c.clone();
        let eps0 = self.psi.threshold_for_ratio(&(Rational::from(4) * self.c3()).recip());
        let mut components = vec![
            NComponent {
                name: "C/eps".into(),
                value: (&c / &eps0).ceil(),
            },
            NComponent {
                name: "tail".into(),
                value: self.tail_floor(1)?,
            },
        ];
        if let Some(o) = &self.cfg.n1_override {
            components.push(NComponent {
                name: "override".into(),
                value: o.clone(),
            });
        }
        if self.cfg.mode == Mode::Strict {
            let (_, term2) = self.growth_terms(None, &self.child_density(1))?;
            components.push(NComponent {
                name: "growth".into(),
                value: term2,
            });
        }
        let n1 = components
            .iter()
            .map(|c| c.value.clone())
            .max()
            .expect("nonempty components");
        self.check_bits(&n1, "N_1")?;

        let (root, attempts, probe) = match &self.cfg.root {
            Some(root) => match self.probe_root(root, &n1)? {
                Ok(p) => (root.clone(), 1, p),
                Err(msg) => return Err(Error::DistributionFailure(msg)),
            },
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
                let radius = &c / rat(&n1);
                let mut found = None;
                let mut last = String::new();
                for attempt in 1..=ROOT_ATTEMPTS {
                    let u: u64 = rng.random();
                    let center = Rational::new(BigInt::from(u), BigInt::one() << 64);
                    let ball = Ball::new(center, radius.clone());
                    match self.probe_root(&ball, &n1)? {
                        Ok(p) => {
                            found = Some((ball, attempt, p));
                            break;
                        }
                        Err(msg) => last = msg,
                    }
                }
                found.ok_or_else(|| {
                    Error::DistributionFailure(format!(
                        "no root ball accepted after {ROOT_ATTEMPTS} draws; last: {last}"
                    ))
                })?
            }
        };
        let level = self.level_one(&root, &n1, probe.points, eps0, components)?;
        let cert = self.tail_certificate(1, &n1)?;
        self.trace.root = root;
        self.trace.root_attempts = attempts;
        self.trace.kb = probe.kb;
        self.trace.kb_audit = probe.rows;
        self.trace.tail_certificates.push(cert);
        self.trace.levels.push(level);
        Ok(self.trace.levels.last().expect("level just pushed"))
    }

    /// Least rung `2^e` of a doubling ladder, from `C/μ(A)` up, at which the
    /// exact band counts inside the annulus meet the distribution bound on
    /// that rung and the next few. Counts stay zero over a long stretch
    /// near a rational center, so the search strides before bisecting.
    fn annulus_kb(&self, a: &AnnulusRecord) -> Result<BigInt> {
        let mu = annulus_measure(&self.space, &a.annulus());
        let e0 = ceil_pow2(&(&self.cfg.c / &mu)).bits() - 1;
        let arcs = a.arcs();
        let anchor = a.center.coord();
        let mut memo: HashMap<u64, bool> = HashMap::new();
        let cap = self.cfg.max_n_bits;
        let mut pass = |e: u64| -> Result<bool> {
            if let Some(&v) = memo.get(&e) {
                return Ok(v);
            }
            if e > cap {
                return Err(Error::ResourceLimit(format!(
                    "distribution ladder in the annulus around {} passes no band within {cap} bits",
                    a.center.point
                )));
            }
            let k = BigInt::one() << e;
            let found = self.system.band_set(anchor, &arcs, &k, true)?.count();
            let v = rat(&found) >= self.required_count(&k, &mu);
            memo.insert(e, v);
            Ok(v)
        };
        let mut e = e0;
        let mut failed: Option<u64> = None;
        loop {
            let mut step = 1;
            while !pass(e)? {
                failed = Some(e);
                e += step;
                // Far above the floor the offsets per arc explode; bounded
                // strides keep the overshoot small.
                step = (step * 2).min(GALLOP_STRIDE);
            }
            let mut lo = failed;
            while lo.is_some_and(|f| e - f > 1) {
                let f = lo.expect("checked");
                let mid = f + (e - f) / 2;
                if pass(mid)? {
                    e = mid;
                } else {
                    lo = Some(mid);
                }
            }
            match (1..=LADDER_RUNGS as u64).find_map(|i| match pass(e + i) {
                Ok(true) => None,
                Ok(false) => Some(Ok(i)),
                Err(err) => Some(Err(err)),
            }) {
                None => return Ok(BigInt::one() << e),
                Some(i) => {
                    let i = i?;
                    failed = Some(e + i);
                    e += i + 1;
                }
            }
        }
    }

    /// `n_{l+1} N^α ψ(1/(C N_l))^α`, rounded up.
    fn child_floor(&self, density: &CertifiedValue, n: &BigInt, n_l: &BigInt) -> Result<Rational> {
        let psi = self.psi.eval(&(&self.cfg.c * rat(n_l)).recip())?;
        let psi_a = self.cv_pow(&psi, &self.cfg.alpha);
        let n_a = self.powr(&rat(n), &self.cfg.alpha);
        Ok(&density.hi * &n_a.hi * &psi_a.hi)
    }

    /// `(1/(C²N) − 2ψ(C/N))/3`, which bounds `δ` below for any set of
    /// band-`N` points, since they sit at least `R/C` apart.
    pub fn band_delta(&self, n: &BigInt) -> Result<Rational> {
        band_delta(&self.cfg, n)
    }

    /// Constants for the next level.
    pub fn select_next_n(&self) -> Result<LevelParams> {
        let level = self
            .trace
            .levels
            .last()
            .ok_or_else(|| Error::Config("no level built yet".into()))?;
        let l = level.params.l;
        let c = &self.cfg.c;
        let n_l = &level.params.n;
        let eps = self
            .psi
            .threshold_for_ratio(&((Rational::one() - &level.params.c) / self.c3()));

        let kl = level
            .annuli
            .par_iter()
            .map(|a| self.annulus_kb(a))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .max()
            .expect("levels are nonempty");
        let mut components = vec![
            NComponent {
                name: "k_l".into(),
                value: kl,
            },
            NComponent {
                name: "C/eps".into(),
                value: (c / &eps).ceil(),
            },
            NComponent {
                name: "C^2 N_l".into(),
                value: (c.pow(2) * rat(n_l)).ceil(),
            },
            NComponent {
                name: "tail".into(),
                value: self.tail_floor(l + 1)?,
            },
        ];
        let density_next = self.child_density(l + 1);
        let prev = Some((&level.params.n_next, n_l));
        if self.cfg.mode == Mode::Strict {
            let (t1, t2) = self.growth_terms(prev, &density_next)?;
            components.push(NComponent {
                name: "growth".into(),
                value: t1.into_iter().fold(t2, BigInt::max),
            });
        }
        let n = components
            .iter()
            .map(|c| c.value.clone())
            .max()
            .expect("nonempty components");
        self.check_bits(&n, &format!("N_{}", l + 1))?;
        let m_required = self.child_floor(&level.params.n_next, &n, n_l)?;
        let growth_floor = self.growth_floor(&n, prev, &density_next)?;
        Ok(LevelParams {
            l: l + 1,
            n,
            eps,
            c: ConstructionConfig::c_of_level(l + 1),
            n_next: density_next,
            m_required,
            target: self.cfg.branching,
            components,
            growth_floor,
            retries: 0,
        })
    }

    /// Count the admissible children of `parent` and keep `want` of them,
    /// each the first admissible band point at or after one of `want`
    /// evenly spaced marks along the two arcs.
    fn brood(&self, parent: &AnnulusRecord, n_next: &BigInt, n_l: &BigInt, want: usize) -> Result<Brood> {
        let band = offspring::band_of(&self.system, parent, n_next)?;
        let census = offspring::census(&self.system, &self.psi, parent, &band, n_l, n_next)?;
        let anchor = parent.center.coord();
        let arcs = parent.arcs();
        let width = &parent.outer - &parent.inner;
        let gap = (Rational::from(2) * &self.cfg.c * rat(n_next)).recip();
        let mut kept: Vec<WdsPoint> = Vec::new();
        let mut skipped = 0;
        let mut floor: Option<Rational> = None;
        for i in 0..want {
            let u = &width * Rational::new(2 * i as i64 + 1, want as i64);
            let mark = if u < width {
                &arcs[0].lo + &u
            } else {
                &arcs[arcs.len() - 1].lo + (&u - &width)
            };
            let mut x0 = match &floor {
                Some(f) if f > &mark => f.clone(),
                _ => mark,
            };
            for _ in 0..MAX_SKIPS {
                let Some(g) = band.first_at_or_after(anchor, &x0) else {
                    break;
                };
                x0 = g.coord() + &gap;
                if offspring::admissible(&self.system, &self.psi, parent, &g, n_l)? {
                    floor = Some(x0.clone());
                    kept.push(WdsPoint {
                        point: Point(self.space.normalize(g.coord())),
                        radius: g.radius,
                    });
                    break;
                }
                skipped += 1;
            }
        }
        Ok(Brood { kept, census, skipped })
    }

    /// Refine every annulus of the last level into the next one.
    pub fn refine_level(&mut self, mut params: LevelParams) -> Result<&LevelSet> {
        let parent = self
            .trace
            .levels
            .last()
            .ok_or_else(|| Error::Config("no level built yet".into()))?;
        if params.l != parent.params.l + 1 {
            return Err(Error::Config(format!(
                "parameters for level {} cannot refine level {}",
                params.l, parent.params.l
            )));
        }
        let n_l = parent.params.n.clone();
        let broods = loop {
            let broods = parent
                .annuli
                .par_iter()
                .map(|a| self.brood(a, &params.n, &n_l, params.target))
                .collect::<Result<Vec<_>>>()?;
            let need = params.m_required.ceil();
            let short = broods
                .iter()
                .enumerate()
                .find(|(_, b)| b.kept.len() < 2 || b.census.admissible < need);
            let Some((i, b)) = short else {
                break broods;
            };
            if params.retries >= REFINE_RETRIES {
                return Err(Error::CountFailure {
                    level: params.l,
                    parent: i,
                    found: b.kept.len(),
                    required: format!("2 kept and {need} admissible, found {} admissible", b.census.admissible),
                });
            }
            params.n <<= 1;
            params.retries += 1;
            self.check_bits(&params.n, &format!("N_{}", params.l))?;
            params.m_required = self.child_floor(&parent.params.n_next, &params.n, &n_l)?;
            params.growth_floor = self.growth_floor(&params.n, Some((&parent.params.n_next, &n_l)), &params.n_next)?;
        };
        let c_next = params.c.clone();
        let target = params.target;
        let mut annuli = Vec::new();
        let mut skipped = 0;
        let mut fewest = usize::MAX;
        let mut short = 0;
        let mut censuses = Vec::with_capacity(broods.len());
        for (i, b) in broods.into_iter().enumerate() {
            skipped += b.skipped;
            fewest = fewest.min(b.kept.len());
            if b.kept.len() < target {
                short += 1;
            }
            for p in b.kept {
                annuli.push(self.annulus_of(p, &c_next, Some(i))?);
            }
            censuses.push(b.census);
        }
        let l = params.l;
        let cert = self.tail_certificate(l, &params.n)?;
        let mut level = self.level_from(params, annuli)?;
        level.skipped = skipped;
        level.short_parents = short;
        if short > 0 {
            self.trace.warnings.push(format!(
                "level {l}: {short} parents kept fewer than {target} children (fewest {fewest})"
            ));
        }
        if let Some(p) = self.trace.levels.last_mut() {
            p.m_observed = Some(fewest);
            p.m_certified = censuses.iter().map(|c| c.admissible.clone()).min();
            for (a, census) in p.annuli.iter_mut().zip(censuses) {
                a.offspring = Some(census);
            }
        }
        self.trace.tail_certificates.push(cert);
        self.trace.levels.push(level);
        Ok(self.trace.levels.last().expect("level just pushed"))
    }

    pub fn verify_level(&self, l: usize) -> Result<LevelReport> {
        verify_level(&self.trace, l)
    }

    /// Verify the newest level and record the report; broken disjointness
    /// or nesting means the constants were wrong and aborts the run.
    fn check_last_level(&mut self) -> Result<()> {
        let l = self.depth();
        let report = self.verify_level(l)?;
        if !report.disjoint || !report.nested {
            return Err(Error::Invariant(format!(
                "level {l} annuli are not disjoint and nested (disjoint: {}, nested: {})",
                report.disjoint, report.nested
            )));
        }
        self.trace.verification.push(report);
        Ok(())
    }
}
