//! Bipartite channels `A′B′ → AB` stored as Choi operators.
//!
//! The Choi operator lives on the factors `(S_A, A, B, S_B)` where `S_A ≅ A′`
//! and `S_B ≅ B′`:
//!
//! ```text
//! J = Σ |i⟩⟨j|_{S_A} ⊗ N(|i⟩⟨j|_{A′} ⊗ |k⟩⟨l|_{B′}) ⊗ |k⟩⟨l|_{S_B}
//! ```
//!
//! and `{B, S_B}` is its B side. Applying a channel contracts the input
//! with `J`, so no Kraus or Stinespring data is kept.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::operators::{
    raw, unnormalized_max_ent, CMatrix, DensityOperator, HermitianOperator, SystemLayout, C64,
};

pub const S_A: &str = "S_A";
pub const A: &str = "A";
pub const B: &str = "B";
pub const S_B: &str = "S_B";

/// Complete-positivity tolerance on the Choi spectrum.
pub const CP_TOL: f64 = 1e-9;
/// Trace-preservation tolerance on `Tr_{AB} J − I`.
pub const TP_TOL: f64 = 1e-7;

/// Layout `(S_A, A, B, S_B)` with B side `{B, S_B}`.
pub fn choi_layout(in_dims: (usize, usize), out_dims: (usize, usize)) -> Result<SystemLayout> {
    SystemLayout::new(
        [
            (S_A.to_string(), in_dims.0),
            (A.to_string(), out_dims.0),
            (B.to_string(), out_dims.1),
            (S_B.to_string(), in_dims.1),
        ],
        [B, S_B],
    )
}

/// Completely positive bipartite map, not necessarily trace preserving.
#[derive(Clone, Debug, PartialEq)]
pub struct CpMap {
    choi: HermitianOperator,
    in_dims: (usize, usize),
    out_dims: (usize, usize),
}

impl CpMap {
    pub fn from_choi(choi: HermitianOperator, in_dims: (usize, usize), out_dims: (usize, usize)) -> Result<Self> {
        let layout = choi_layout(in_dims, out_dims)?;
        let choi = choi.with_layout(layout)?;
        let min_eig = choi.min_eigenvalue();
        if min_eig < -CP_TOL {
            return Err(Error::NotChannel(format!("Choi operator has eigenvalue {min_eig:.3e}")));
        }
        Ok(CpMap { choi, in_dims, out_dims })
    }

    pub fn choi(&self) -> &HermitianOperator {
        &self.choi
    }

    pub fn in_dims(&self) -> (usize, usize) {
        self.in_dims
    }

    pub fn out_dims(&self) -> (usize, usize) {
        self.out_dims
    }
}

/// Bipartite quantum channel `A′B′ → AB`.
#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteChannel {
    choi: HermitianOperator,
    in_dims: (usize, usize),
    out_dims: (usize, usize),
}

impl BipartiteChannel {
    /// Validates complete positivity and trace preservation. The Choi matrix
    /// is relabelled onto `(S_A, A, B, S_B)`.
    pub fn from_choi(choi: HermitianOperator, in_dims: (usize, usize), out_dims: (usize, usize)) -> Result<Self> {
        let cp = CpMap::from_choi(choi, in_dims, out_dims)?;
        let marginal = cp.choi.partial_trace(&[A, B])?;
        let dev = marginal.max_abs_diff(&HermitianOperator::identity(marginal.layout().clone()));
        if dev > TP_TOL {
            return Err(Error::NotChannel(format!("Tr_AB J deviates from identity by {dev:.3e}")));
        }
        Ok(BipartiteChannel { choi: cp.choi, in_dims, out_dims })
    }

    /// Choi operator of the linear map `f`, which takes an operator on
    /// `A′ ⊗ B′` to one on `A ⊗ B`. Linearity is spot-checked.
    pub fn choi_of<F>(f: F, in_dims: (usize, usize), out_dims: (usize, usize)) -> Result<Self>
    where
        F: Fn(&CMatrix) -> CMatrix,
    {
        let din = in_dims.0 * in_dims.1;
        let dout = out_dims.0 * out_dims.1;
        let call = |x: &CMatrix| -> Result<CMatrix> {
            let y = f(x);
            if y.nrows() != dout || y.ncols() != dout {
                return Err(Error::DimensionMismatch(format!(
                    "map returned {}x{}, expected {dout}x{dout}",
                    y.nrows(),
                    y.ncols()
                )));
            }
            Ok(y)
        };
        check_linearity(&call, din)?;
        let layout = choi_layout(in_dims, out_dims)?;
        let (ia, ib) = in_dims;
        let (oa, ob) = out_dims;
        let mut j = CMatrix::zeros(layout.dim(), layout.dim());
        for i in 0..ia {
            for jj in 0..ia {
                for k in 0..ib {
                    for l in 0..ib {
                        let mut e = CMatrix::zeros(din, din);
                        e[(i * ib + k, jj * ib + l)] = C64::new(1.0, 0.0);
                        let y = call(&e)?;
                        for a in 0..oa {
                            for b in 0..ob {
                                for a2 in 0..oa {
                                    for b2 in 0..ob {
                                        let r = ((i * oa + a) * ob + b) * ib + k;
                                        let c = ((jj * oa + a2) * ob + b2) * ib + l;
                                        j[(r, c)] = y[(a * ob + b, a2 * ob + b2)];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        BipartiteChannel::from_choi(HermitianOperator::new(layout, j)?, in_dims, out_dims)
    }

    pub fn identity(da: usize, db: usize) -> Self {
        let ua = HermitianOperator::projector_onto(
            SystemLayout::new([(S_A.to_string(), da), (A.to_string(), da)], Vec::<String>::new()).expect("labels"),
            &unnormalized_max_ent(da),
        )
        .expect("dims");
        let ub = HermitianOperator::projector_onto(
            SystemLayout::new([(B.to_string(), db), (S_B.to_string(), db)], [B, S_B]).expect("labels"),
            &unnormalized_max_ent(db),
        )
        .expect("dims");
        let choi = ua.tensor(&ub).expect("disjoint labels");
        BipartiteChannel { choi, in_dims: (da, db), out_dims: (da, db) }
    }

    /// `N(ρ) = Tr[ρ] ω`; the Choi operator is `I_{S_A} ⊗ ω_{AB} ⊗ I_{S_B}`.
    pub fn replacer(omega: &DensityOperator, in_dims: (usize, usize)) -> Result<Self> {
        let f = omega.layout().factors();
        if f.len() != 2 {
            return Err(Error::DimensionMismatch(format!("replacer needs a two-factor state, got {}", omega.layout())));
        }
        let out_dims = (f[0].1, f[1].1);
        let layout = choi_layout(in_dims, out_dims)?;
        let ia = CMatrix::identity(in_dims.0, in_dims.0);
        let ib = CMatrix::identity(in_dims.1, in_dims.1);
        let j = ia.kronecker(omega.matrix()).kronecker(&ib);
        Ok(BipartiteChannel { choi: HermitianOperator::from_parts(layout, j), in_dims, out_dims })
    }

    /// Product of an Alice-side channel `A′ → A` and a Bob-side channel `B′ → B`.
    pub fn product(alice: &PointToPointChannel, bob: &PointToPointChannel) -> Self {
        let in_dims = (alice.d_in(), bob.d_in());
        let out_dims = (alice.d_out(), bob.d_out());
        // J_a on (S_A, A) ⊗ J_b on (S_B, B) → reorder to (S_A, A, B, S_B).
        let kron = alice.choi().matrix().kronecker(bob.choi().matrix());
        let dims = [in_dims.0, out_dims.0, in_dims.1, out_dims.1];
        let j = raw::permute(&kron, &dims, &[0, 1, 3, 2]);
        let layout = choi_layout(in_dims, out_dims).expect("positive dims");
        BipartiteChannel { choi: HermitianOperator::from_parts(layout, j), in_dims, out_dims }
    }

    pub fn choi(&self) -> &HermitianOperator {
        &self.choi
    }

    pub fn in_dims(&self) -> (usize, usize) {
        self.in_dims
    }

    pub fn out_dims(&self) -> (usize, usize) {
        self.out_dims
    }

    pub fn as_cp_map(&self) -> CpMap {
        CpMap { choi: self.choi.clone(), in_dims: self.in_dims, out_dims: self.out_dims }
    }

    /// `J / (|A′||B′|)` as a state on `(S_A, A, B, S_B)`.
    pub fn choi_state(&self) -> DensityOperator {
        let d = (self.in_dims.0 * self.in_dims.1) as f64;
        DensityOperator::with_tolerance(self.choi.scale(1.0 / d), TP_TOL).expect("valid channel")
    }

    /// Apply to an operator whose factors `a_port`, `b_port` are the channel
    /// inputs. Outputs replace the ports in place and keep their labels.
    pub fn apply_operator(&self, x: &HermitianOperator, a_port: &str, b_port: &str) -> Result<HermitianOperator> {
        let layout = x.layout();
        let (da, db) = (layout.dim_of(a_port)?, layout.dim_of(b_port)?);
        if a_port == b_port {
            return Err(Error::DuplicateLabel(a_port.to_string()));
        }
        if (da, db) != self.in_dims {
            return Err(Error::DimensionMismatch(format!(
                "channel expects inputs {:?}, ports `{a_port}`, `{b_port}` have {:?}",
                self.in_dims,
                (da, db)
            )));
        }
        let labels: Vec<&str> = layout.labels().collect();
        let mut order: Vec<&str> = vec![a_port, b_port];
        order.extend(labels.iter().copied().filter(|l| *l != a_port && *l != b_port));
        let front = x.permute(&order)?;
        let rest: usize = front.layout().dims()[2..].iter().product();
        let out = apply_raw(self.choi.matrix(), self.in_dims, self.out_dims, front.matrix(), rest);
        let out_layout = front.layout().resized(a_port, self.out_dims.0)?.resized(b_port, self.out_dims.1)?;
        HermitianOperator::from_parts(out_layout, out).permute(&labels)
    }

    pub fn apply(&self, rho: &DensityOperator, a_port: &str, b_port: &str) -> Result<DensityOperator> {
        let out = self.apply_operator(rho.op(), a_port, b_port)?;
        DensityOperator::with_tolerance(out, 1e-8)
    }

    /// Serial composition `self ∘ first`.
    pub fn compose(&self, first: &BipartiteChannel) -> Result<BipartiteChannel> {
        if first.out_dims != self.in_dims {
            return Err(Error::DimensionMismatch(format!(
                "composition needs {:?} outputs to feed {:?} inputs",
                first.out_dims, self.in_dims
            )));
        }
        let j = self.apply_operator(&first.choi, A, B)?;
        let layout = choi_layout(first.in_dims, self.out_dims)?;
        Ok(BipartiteChannel {
            choi: HermitianOperator::from_parts(layout, j.into_matrix()),
            in_dims: first.in_dims,
            out_dims: self.out_dims,
        })
    }

    /// Parallel composition; Alice holds `(self.A, other.A)`, Bob `(self.B, other.B)`,
    /// the first channel's factor being the more significant.
    pub fn parallel(&self, other: &BipartiteChannel) -> BipartiteChannel {
        let kron = self.choi.matrix().kronecker(other.choi.matrix());
        let dims = [
            self.in_dims.0,
            self.out_dims.0,
            self.out_dims.1,
            self.in_dims.1,
            other.in_dims.0,
            other.out_dims.0,
            other.out_dims.1,
            other.in_dims.1,
        ];
        let j = raw::permute(&kron, &dims, &[0, 4, 1, 5, 2, 6, 3, 7]);
        let in_dims = (self.in_dims.0 * other.in_dims.0, self.in_dims.1 * other.in_dims.1);
        let out_dims = (self.out_dims.0 * other.out_dims.0, self.out_dims.1 * other.out_dims.1);
        let layout = choi_layout(in_dims, out_dims).expect("positive dims");
        BipartiteChannel { choi: HermitianOperator::from_parts(layout, j), in_dims, out_dims }
    }

    /// `N ⊗ id` on memories of dimensions `mem_a`, `mem_b`.
    pub fn with_memory(&self, mem_a: usize, mem_b: usize) -> BipartiteChannel {
        self.parallel(&BipartiteChannel::identity(mem_a, mem_b))
    }

    /// Minimum eigenvalue of `T_{B S_B}(J)`.
    pub fn cpptp_min_eigenvalue(&self) -> f64 {
        self.choi.pt_b().min_eigenvalue()
    }

    /// `T_B ∘ N ∘ T_{B′}` is completely positive, i.e. `T_{B S_B}(J) ⪰ −tol`.
    pub fn is_cpptp(&self, tol: f64) -> bool {
        self.cpptp_min_eigenvalue() >= -tol
    }
}

/// `Σ_{pq} J_pq ⊗ X_pq` where `p = (i, k)` ranges over input basis pairs.
/// `x` has the channel inputs as its leading factors followed by `rest`.
fn apply_raw(
    j: &CMatrix,
    in_dims: (usize, usize),
    out_dims: (usize, usize),
    x: &CMatrix,
    rest: usize,
) -> CMatrix {
    let (ia, ib) = in_dims;
    let (oa, ob) = out_dims;
    let dout = oa * ob;
    let mut out = CMatrix::zeros(dout * rest, dout * rest);
    for i in 0..ia {
        for k in 0..ib {
            let p = i * ib + k;
            for jj in 0..ia {
                for l in 0..ib {
                    let q = jj * ib + l;
                    let xb = x.view((p * rest, q * rest), (rest, rest));
                    if xb.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                        continue;
                    }
                    for a in 0..oa {
                        for b in 0..ob {
                            let r = ((i * oa + a) * ob + b) * ib + k;
                            let ro = (a * ob + b) * rest;
                            for a2 in 0..oa {
                                for b2 in 0..ob {
                                    let c = ((jj * oa + a2) * ob + b2) * ib + l;
                                    let jv = j[(r, c)];
                                    if jv == C64::new(0.0, 0.0) {
                                        continue;
                                    }
                                    let co = (a2 * ob + b2) * rest;
                                    let mut dst = out.view_mut((ro, co), (rest, rest));
                                    dst += xb * jv;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn check_linearity<F>(f: &F, din: usize) -> Result<()>
where
    F: Fn(&CMatrix) -> Result<CMatrix>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..3 {
        let x = random_complex(din, din, &mut rng);
        let y = random_complex(din, din, &mut rng);
        let c = C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
        let lhs = f(&(&x + &y * c))?;
        let rhs = f(&x)? + f(&y)? * c;
        let scale = raw::max_abs(&lhs).max(1.0);
        let dev = raw::max_abs(&(lhs - rhs));
        if dev > 1e-9 * scale {
            return Err(Error::Nonlinear(dev));
        }
    }
    Ok(())
}

pub(crate) fn random_complex(r: usize, c: usize, rng: &mut impl Rng) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| C64::new(StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng)))
}

/// Channel `A → B` with Choi operator on `(R, B)`, `R ≅ A`, B side `{B}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointToPointChannel {
    choi: HermitianOperator,
}

pub const R: &str = "R";

impl PointToPointChannel {
    pub fn from_choi(choi: HermitianOperator, d_in: usize, d_out: usize) -> Result<Self> {
        let layout = SystemLayout::bipartite(R, d_in, B, d_out)?;
        let choi = choi.with_layout(layout)?;
        let min_eig = choi.min_eigenvalue();
        if min_eig < -CP_TOL {
            return Err(Error::NotChannel(format!("Choi operator has eigenvalue {min_eig:.3e}")));
        }
        let marginal = choi.partial_trace(&[B])?;
        let dev = marginal.max_abs_diff(&HermitianOperator::identity(marginal.layout().clone()));
        if dev > TP_TOL {
            return Err(Error::NotChannel(format!("Tr_B J deviates from identity by {dev:.3e}")));
        }
        Ok(PointToPointChannel { choi })
    }

    /// Channel `ρ ↦ Σ K ρ K†`.
    pub fn from_kraus(kraus: &[CMatrix]) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| Error::InvalidArgument("no Kraus operators".into()))?;
        let (d_out, d_in) = first.shape();
        let ups = unnormalized_max_ent(d_in);
        let mut j = CMatrix::zeros(d_in * d_out, d_in * d_out);
        for k in kraus {
            if k.shape() != (d_out, d_in) {
                return Err(Error::DimensionMismatch("Kraus operators of differing shapes".into()));
            }
            let op = CMatrix::identity(d_in, d_in).kronecker(k);
            let v: DVector<C64> = op * &ups;
            j += &v * v.adjoint();
        }
        let layout = SystemLayout::bipartite(R, d_in, B, d_out)?;
        PointToPointChannel::from_choi(HermitianOperator::new(layout, j)?, d_in, d_out)
    }

    pub fn identity(d: usize) -> Self {
        PointToPointChannel::from_kraus(&[CMatrix::identity(d, d)]).expect("identity is a channel")
    }

    /// `ρ ↦ (1 − p) ρ + p Tr[ρ] I/d`.
    pub fn depolarizing(d: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("depolarizing parameter {p} outside [0, 1]")));
        }
        let phi = HermitianOperator::projector_onto(SystemLayout::bipartite(R, d, B, d)?, &unnormalized_max_ent(d))?;
        let mixed = HermitianOperator::identity(phi.layout().clone()).scale(1.0 / d as f64);
        let j = phi.scale(1.0 - p).add(&mixed.scale(p))?;
        PointToPointChannel::from_choi(j, d, d)
    }

    pub fn choi(&self) -> &HermitianOperator {
        &self.choi
    }

    pub fn d_in(&self) -> usize {
        self.choi.layout().factors()[0].1
    }

    pub fn d_out(&self) -> usize {
        self.choi.layout().factors()[1].1
    }

    /// Act on the factor `port` of `x`; the output factor keeps the label.
    pub fn apply_operator(&self, x: &HermitianOperator, port: &str) -> Result<HermitianOperator> {
        let layout = x.layout();
        let d = layout.dim_of(port)?;
        if d != self.d_in() {
            return Err(Error::DimensionMismatch(format!("channel input {} vs port `{port}` of {d}", self.d_in())));
        }
        let labels: Vec<&str> = layout.labels().collect();
        let mut order = vec![port];
        order.extend(labels.iter().copied().filter(|l| *l != port));
        let front = x.permute(&order)?;
        let rest: usize = front.layout().dims()[1..].iter().product();
        let out = apply_raw(self.choi.matrix(), (self.d_in(), 1), (1, self.d_out()), front.matrix(), rest);
        let out_layout = front.layout().resized(port, self.d_out())?;
        HermitianOperator::from_parts(out_layout, out).permute(&labels)
    }

    pub fn apply(&self, rho: &DensityOperator, port: &str) -> Result<DensityOperator> {
        DensityOperator::with_tolerance(self.apply_operator(rho.op(), port)?, 1e-8)
    }

    /// Bipartite channel with trivial `B′` and trivial `A`: Alice sends, Bob receives.
    pub fn embed(&self) -> BipartiteChannel {
        let in_dims = (self.d_in(), 1);
        let out_dims = (1, self.d_out());
        let layout = choi_layout(in_dims, out_dims).expect("positive dims");
        BipartiteChannel { choi: HermitianOperator::from_parts(layout, self.choi.matrix().clone()), in_dims, out_dims }
    }
}

/// Haar-like random isometry `d_in → d_out·rank` split into Kraus operators.
pub fn random_local_channel(d_in: usize, d_out: usize, rank: usize, rng: &mut impl Rng) -> PointToPointChannel {
    let rank = rank.max(d_in.div_ceil(d_out)).max(1);
    let g = random_complex(d_out * rank, d_in, rng);
    let q = g.qr().q();
    let kraus: Vec<CMatrix> = (0..rank).map(|k| q.rows(k * d_out, d_out).into_owned()).collect();
    PointToPointChannel::from_kraus(&kraus).expect("isometry gives a channel")
}

/// Random channel on the joint system `A′B′ → AB`, generally entangling.
pub fn random_channel(in_dims: (usize, usize), out_dims: (usize, usize), rank: usize, rng: &mut impl Rng) -> BipartiteChannel {
    let joint = random_local_channel(in_dims.0 * in_dims.1, out_dims.0 * out_dims.1, rank, rng);
    BipartiteChannel::from_point_to_point(&joint, in_dims, out_dims).expect("dimensions factor")
}

impl BipartiteChannel {
    /// Reads a channel `A′B′ → AB` given on the joint systems, inputs and
    /// outputs each split with Alice's factor first.
    pub fn from_point_to_point(
        joint: &PointToPointChannel,
        in_dims: (usize, usize),
        out_dims: (usize, usize),
    ) -> Result<BipartiteChannel> {
        if joint.d_in() != in_dims.0 * in_dims.1 || joint.d_out() != out_dims.0 * out_dims.1 {
            return Err(Error::DimensionMismatch(format!(
                "{}→{} channel cannot be split as {in_dims:?}→{out_dims:?}",
                joint.d_in(),
                joint.d_out()
            )));
        }
        // (R_A, R_B, A, B) → (S_A, A, B, S_B)
        let dims = [in_dims.0, in_dims.1, out_dims.0, out_dims.1];
        let j = raw::permute(joint.choi().matrix(), &dims, &[0, 2, 3, 1]);
        let layout = choi_layout(in_dims, out_dims)?;
        Ok(BipartiteChannel { choi: HermitianOperator::from_parts(layout, j), in_dims, out_dims })
    }
}

/// Convex mixture of products of random local channels; C-PPT-P by construction.
pub fn random_cpptp(in_dims: (usize, usize), out_dims: (usize, usize), seed: u64) -> BipartiteChannel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_cpptp_with(in_dims, out_dims, &mut rng)
}

pub(crate) fn random_cpptp_with(in_dims: (usize, usize), out_dims: (usize, usize), rng: &mut impl Rng) -> BipartiteChannel {
    let terms = rng.random_range(1..=3);
    let weights: Vec<f64> = (0..terms).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let layout = choi_layout(in_dims, out_dims).expect("positive dims");
    let mut j = CMatrix::zeros(layout.dim(), layout.dim());
    for w in weights {
        let ra = rng.random_range(1..=2);
        let rb = rng.random_range(1..=2);
        let alice = random_local_channel(in_dims.0, out_dims.0, ra, rng);
        let bob = random_local_channel(in_dims.1, out_dims.1, rb, rng);
        j += BipartiteChannel::product(&alice, &bob).choi.matrix() * C64::new(w / total, 0.0);
    }
    BipartiteChannel { choi: HermitianOperator::from_parts(layout, j), in_dims, out_dims }
}

/// Superchannel `M ↦ post ∘ (M ⊗ id_{A_M B_M}) ∘ pre` with C-PPT-P `pre` and `post`.
#[derive(Clone, Debug)]
pub struct PptSuperchannel {
    pre: BipartiteChannel,
    post: BipartiteChannel,
    memory: (usize, usize),
    /// Input and output dimensions of the channels it transforms.
    inner_in: (usize, usize),
    inner_out: (usize, usize),
}

impl PptSuperchannel {
    pub fn new(pre: BipartiteChannel, post: BipartiteChannel, memory: (usize, usize), tol: f64) -> Result<Self> {
        for ch in [&pre, &post] {
            if !ch.is_cpptp(tol) {
                return Err(Error::NotCpptp(ch.cpptp_min_eigenvalue()));
            }
        }
        let split = |d: (usize, usize), what: &str| -> Result<(usize, usize)> {
            if memory.0 == 0 || memory.1 == 0 || !d.0.is_multiple_of(memory.0) || !d.1.is_multiple_of(memory.1) {
                return Err(Error::DimensionMismatch(format!("{what} dimensions {d:?} do not factor through memory {memory:?}")));
            }
            Ok((d.0 / memory.0, d.1 / memory.1))
        };
        let inner_in = split(pre.out_dims, "pre-processing output")?;
        let inner_out = split(post.in_dims, "post-processing input")?;
        Ok(PptSuperchannel { pre, post, memory, inner_in, inner_out })
    }

    pub fn inner_in(&self) -> (usize, usize) {
        self.inner_in
    }

    pub fn inner_out(&self) -> (usize, usize) {
        self.inner_out
    }

    pub fn apply(&self, m: &BipartiteChannel) -> Result<BipartiteChannel> {
        if m.in_dims != self.inner_in || m.out_dims != self.inner_out {
            return Err(Error::DimensionMismatch(format!(
                "superchannel acts on {:?} → {:?} channels, got {:?} → {:?}",
                self.inner_in, self.inner_out, m.in_dims, m.out_dims
            )));
        }
        let middle = m.with_memory(self.memory.0, self.memory.1);
        self.post.compose(&middle.compose(&self.pre)?)
    }

    /// Random superchannel from `random_cpptp` pre- and post-processing.
    pub fn random(
        outer_in: (usize, usize),
        inner_in: (usize, usize),
        inner_out: (usize, usize),
        outer_out: (usize, usize),
        memory: (usize, usize),
        rng: &mut impl Rng,
    ) -> Self {
        let pre = random_cpptp_with(outer_in, (inner_in.0 * memory.0, inner_in.1 * memory.1), rng);
        let post = random_cpptp_with((inner_out.0 * memory.0, inner_out.1 * memory.1), outer_out, rng);
        PptSuperchannel { pre, post, memory, inner_in, inner_out }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{basis_state, maximally_entangled, maximally_entangled_on, numerical_rank, DEFAULT_RANK_TOL};
    use approx::assert_relative_eq;

    fn random_state(layout: SystemLayout, rng: &mut ChaCha8Rng) -> DensityOperator {
        let n = layout.dim();
        let g = random_complex(n, n, rng);
        DensityOperator::normalized(HermitianOperator::from_parts(layout, &g * g.adjoint())).unwrap()
    }

    fn kraus_of_depolarizing(p: f64) -> Vec<CMatrix> {
        let i = C64::new(0.0, 1.0);
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let x = CMatrix::from_row_slice(2, 2, &[zero, one, one, zero]);
        let y = CMatrix::from_row_slice(2, 2, &[zero, -i, i, zero]);
        let z = CMatrix::from_row_slice(2, 2, &[one, zero, zero, -one]);
        let id = CMatrix::identity(2, 2);
        vec![
            id * C64::new((1.0 - 3.0 * p / 4.0).sqrt(), 0.0),
            x * C64::new((p / 4.0).sqrt(), 0.0),
            y * C64::new((p / 4.0).sqrt(), 0.0),
            z * C64::new((p / 4.0).sqrt(), 0.0),
        ]
    }

    fn kraus_apply(kraus: &[CMatrix], rho: &CMatrix) -> CMatrix {
        kraus.iter().map(|k| k * rho * k.adjoint()).fold(CMatrix::zeros(kraus[0].nrows(), kraus[0].nrows()), |a, b| a + b)
    }

    fn swap_matrix(d: usize) -> CMatrix {
        let mut s = CMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                s[(j * d + i, i * d + j)] = C64::new(1.0, 0.0);
            }
        }
        s
    }

    #[test]
    fn identity_channel_choi_is_rank_one() {
        let id = PointToPointChannel::identity(2).embed();
        assert_eq!(numerical_rank(id.choi(), DEFAULT_RANK_TOL), 1);
        let direct = BipartiteChannel::choi_of(|x| x.clone(), (2, 1), (1, 2)).unwrap();
        assert!(direct.choi().max_abs_diff(id.choi()) < 1e-15);
    }

    #[test]
    fn completely_depolarizing_choi() {
        let dep = PointToPointChannel::depolarizing(2, 1.0).unwrap();
        let expect = CMatrix::identity(4, 4) * C64::new(0.5, 0.0);
        assert!(raw::max_abs(&(dep.choi().matrix() - expect)) < 1e-15);
    }

    #[test]
    fn swap_channel_choi() {
        let s = swap_matrix(2);
        let swap = BipartiteChannel::choi_of(|x| &s * x * s.adjoint(), (2, 2), (2, 2)).unwrap();
        assert_eq!(numerical_rank(swap.choi(), DEFAULT_RANK_TOL), 1);
        assert_relative_eq!(swap.choi().trace(), 4.0, epsilon = 1e-12);
        assert!(!swap.is_cpptp(1e-9));
    }

    #[test]
    fn nonlinear_map_rejected() {
        let r = BipartiteChannel::choi_of(|x| x * x, (2, 1), (2, 1));
        assert!(matches!(r, Err(Error::Nonlinear(_))));
        let r = BipartiteChannel::choi_of(|x| x.clone(), (2, 1), (2, 2));
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn identity_apply_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layout = SystemLayout::new(
            [("LA".to_string(), 2), ("Ap".to_string(), 2), ("Bp".to_string(), 3), ("LB".to_string(), 2)],
            ["Bp", "LB"],
        )
        .unwrap();
        let rho = random_state(layout, &mut rng);
        let out = BipartiteChannel::identity(2, 3).apply(&rho, "Ap", "Bp").unwrap();
        assert!(out.max_abs_diff(&rho) < 1e-14);
        assert_eq!(out.layout(), rho.layout());
    }

    #[test]
    fn replacer_outputs_omega() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let omega = random_state(SystemLayout::bipartite("X", 2, "Y", 2).unwrap(), &mut rng);
        let rep = BipartiteChannel::replacer(&omega, (2, 2)).unwrap();
        let layout = SystemLayout::new(
            [("LA".to_string(), 2), ("Ap".to_string(), 2), ("Bp".to_string(), 2), ("LB".to_string(), 2)],
            ["Bp", "LB"],
        )
        .unwrap();
        let rho = random_state(layout, &mut rng);
        let out = rep.apply(&rho, "Ap", "Bp").unwrap();
        let ab = out.marginal(&["Ap", "Bp"]).unwrap();
        assert!(raw::max_abs(&(ab.matrix() - omega.matrix())) < 1e-12);
        let mem = out.marginal(&["LA", "LB"]).unwrap();
        assert!(mem.max_abs_diff(&rho.marginal(&["LA", "LB"]).unwrap()) < 1e-12);

        let pi = DensityOperator::maximally_mixed(SystemLayout::bipartite("X", 2, "Y", 2).unwrap());
        let rep = BipartiteChannel::replacer(&pi, (2, 2)).unwrap();
        let o = rep.apply(&random_state(SystemLayout::bipartite("a", 2, "b", 2).unwrap(), &mut rng), "a", "b").unwrap();
        assert!(raw::max_abs(&(o.matrix() - pi.matrix())) < 1e-14);
    }

    #[test]
    fn replacer_choi_matches_formula() {
        let phi = maximally_entangled(2);
        let rep = BipartiteChannel::replacer(&phi, (2, 2)).unwrap();
        let expect = CMatrix::identity(2, 2).kronecker(phi.matrix()).kronecker(&CMatrix::identity(2, 2));
        assert!(raw::max_abs(&(rep.choi().matrix() - expect)) < 1e-15);
    }

    #[test]
    fn choi_contraction_matches_direct_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_complex(4, 4, &mut rng).qr().q();
        let kraus = kraus_of_depolarizing(0.3);
        let f = |x: &CMatrix| {
            // Unitary on both inputs, then depolarizing on Alice's output.
            let y = &u * x * u.adjoint();
            let mut out = CMatrix::zeros(4, 4);
            for k in &kraus {
                let kk = k.kronecker(&CMatrix::identity(2, 2));
                out += &kk * &y * kk.adjoint();
            }
            out
        };
        let ch = BipartiteChannel::choi_of(f, (2, 2), (2, 2)).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let rho = random_state(SystemLayout::bipartite("a", 2, "b", 2).unwrap(), &mut rng);
            let out = ch.apply(&rho, "a", "b").unwrap();
            worst = worst.max(raw::max_abs(&(out.matrix() - f(rho.matrix()))));
        }
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn composition_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = random_cpptp_with((2, 2), (2, 2), &mut rng);
        let id = BipartiteChannel::identity(2, 2);
        assert!(id.compose(&n).unwrap().choi().max_abs_diff(n.choi()) < 1e-12);
        assert!(n.compose(&id).unwrap().choi().max_abs_diff(n.choi()) < 1e-12);
        let omega = random_state(SystemLayout::bipartite("X", 2, "Y", 2).unwrap(), &mut rng);
        let rep = BipartiteChannel::replacer(&omega, (2, 2)).unwrap();
        assert!(rep.compose(&n).unwrap().choi().max_abs_diff(rep.choi()) < 1e-12);

        let n2 = random_cpptp_with((2, 2), (2, 2), &mut rng);
        let n3 = random_cpptp_with((2, 2), (2, 2), &mut rng);
        let left = n3.compose(&n2).unwrap().compose(&n).unwrap();
        let right = n3.compose(&n2.compose(&n).unwrap()).unwrap();
        assert!(left.choi().max_abs_diff(right.choi()) < 1e-9);
        assert!(n.compose(&BipartiteChannel::identity(3, 2)).is_err());
    }

    #[test]
    fn depolarizing_composition() {
        let (p, q) = (0.3, 0.45);
        let dp = PointToPointChannel::from_kraus(&kraus_of_depolarizing(p)).unwrap();
        let dq = PointToPointChannel::from_kraus(&kraus_of_depolarizing(q)).unwrap();
        let id = PointToPointChannel::identity(2);
        let first = BipartiteChannel::product(&dp, &id);
        let second = BipartiteChannel::product(&dq, &id);
        let composed = second.compose(&first).unwrap();
        // Kraus-level oracle: apply both Kraus sets in sequence on Alice.
        let combined: Vec<CMatrix> = kraus_of_depolarizing(q)
            .iter()
            .flat_map(|b| kraus_of_depolarizing(p).into_iter().map(move |a| b * a))
            .collect();
        let oracle = BipartiteChannel::product(&PointToPointChannel::from_kraus(&combined).unwrap(), &id);
        assert!(composed.choi().max_abs_diff(oracle.choi()) < 1e-12);
        let single = PointToPointChannel::depolarizing(2, 1.0 - (1.0 - p) * (1.0 - q)).unwrap();
        assert!(composed.choi().max_abs_diff(BipartiteChannel::product(&single, &id).choi()) < 1e-12);
        let _ = kraus_apply;
    }

    #[test]
    fn cpptp_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_local_channel(2, 3, 2, &mut rng);
        let b = random_local_channel(2, 2, 1, &mut rng);
        assert!(BipartiteChannel::product(&a, &b).is_cpptp(1e-9));
        let id = PointToPointChannel::identity(2).embed();
        assert!(!id.is_cpptp(1e-9));
        assert_relative_eq!(id.cpptp_min_eigenvalue(), -1.0, epsilon = 1e-12);
        let dep = PointToPointChannel::depolarizing(2, 1.0).unwrap().embed();
        assert!(dep.is_cpptp(1e-9));
        for seed in 0..10 {
            assert!(random_cpptp((2, 2), (2, 2), seed).is_cpptp(1e-8));
        }
        assert_eq!(random_cpptp((2, 2), (2, 2), 7), random_cpptp((2, 2), (2, 2), 7));
    }

    #[test]
    fn embedding_preserves_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ch = random_local_channel(2, 3, 2, &mut rng);
        let emb = ch.embed();
        let rho_a = random_state(SystemLayout::new([("a".to_string(), 2)], Vec::<String>::new()).unwrap(), &mut rng);
        let triv = DensityOperator::new(HermitianOperator::identity(
            SystemLayout::new([("b".to_string(), 1)], Vec::<String>::new()).unwrap(),
        ))
        .unwrap();
        let rho = rho_a.tensor(&triv).unwrap();
        let via_embed = emb.apply(&rho, "a", "b").unwrap().partial_trace(&["a"]).unwrap();
        let direct = ch.apply(&rho_a, "a").unwrap();
        assert!(raw::max_abs(&(via_embed.matrix() - direct.matrix())) < 1e-12);
    }

    #[test]
    fn superchannels() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_cpptp_with((2, 2), (2, 2), &mut rng);
        let id = BipartiteChannel::identity(2, 2);
        let theta = PptSuperchannel::new(id.clone(), id.clone(), (1, 1), 1e-9).unwrap();
        assert!(theta.apply(&m).unwrap().choi().max_abs_diff(m.choi()) < 1e-12);

        let pre = random_cpptp_with((2, 2), (2, 2), &mut rng);
        let post = random_cpptp_with((2, 2), (2, 2), &mut rng);
        let theta = PptSuperchannel::new(pre.clone(), post.clone(), (1, 1), 1e-9).unwrap();
        let direct = post.compose(&m.compose(&pre).unwrap()).unwrap();
        assert!(theta.apply(&m).unwrap().choi().max_abs_diff(direct.choi()) < 1e-12);

        let sigma = basis_state("X", 2, 0).unwrap().tensor(&basis_state("Y", 2, 1).unwrap()).unwrap();
        let rep = BipartiteChannel::replacer(&sigma, (4, 4)).unwrap();
        let pre = random_cpptp_with((2, 2), (4, 4), &mut rng);
        let theta = PptSuperchannel::new(pre, rep, (2, 2), 1e-9).unwrap();
        let swap = swap_matrix(2);
        let not_ppt = BipartiteChannel::choi_of(|x| &swap * x * swap.adjoint(), (2, 2), (2, 2)).unwrap();
        let out = theta.apply(&not_ppt).unwrap();
        assert!(out.is_cpptp(1e-9));

        assert!(matches!(PptSuperchannel::new(not_ppt.clone(), id.clone(), (1, 1), 1e-9), Err(Error::NotCpptp(_))));
        let theta = PptSuperchannel::random((2, 2), (2, 2), (2, 2), (2, 2), (2, 2), &mut rng);
        let out = theta.apply(&m).unwrap();
        assert!(out.is_cpptp(1e-8));
        assert!(BipartiteChannel::from_choi(out.choi().clone(), (2, 2), (2, 2)).is_ok());
    }

    #[test]
    fn joint_channel_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let joint = random_local_channel(4, 4, 2, &mut rng);
        let split = BipartiteChannel::from_point_to_point(&joint, (2, 2), (2, 2)).unwrap();
        assert!(BipartiteChannel::from_choi(split.choi().clone(), (2, 2), (2, 2)).is_ok());
        let rho = random_state(SystemLayout::bipartite("a", 2, "b", 2).unwrap(), &mut rng);
        let via_split = split.apply(&rho, "a", "b").unwrap();
        let merged = DensityOperator::new(
            rho.op().with_layout(SystemLayout::new([("ab".to_string(), 4)], Vec::<String>::new()).unwrap()).unwrap(),
        )
        .unwrap();
        let direct = joint.apply(&merged, "ab").unwrap();
        assert!(raw::max_abs(&(via_split.matrix() - direct.matrix())) < 1e-12);
        assert!(BipartiteChannel::from_point_to_point(&joint, (2, 3), (2, 2)).is_err());
    }

    #[test]
    fn with_memory_acts_as_identity_on_memory() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = random_cpptp_with((2, 2), (2, 2), &mut rng);
        let big = n.with_memory(2, 2);
        let rho = random_state(SystemLayout::bipartite("a", 4, "b", 4).unwrap(), &mut rng);
        // Reference: view (a, b) as (a1, am, b1, bm) and apply n on (a1, b1).
        let split = rho
            .op()
            .with_layout(
                SystemLayout::new(
                    [("a1".to_string(), 2), ("am".to_string(), 2), ("b1".to_string(), 2), ("bm".to_string(), 2)],
                    ["b1", "bm"],
                )
                .unwrap(),
            )
            .unwrap();
        let split = DensityOperator::new(split).unwrap();
        let reference = n.apply(&split, "a1", "b1").unwrap();
        let out = big.apply(&rho, "a", "b").unwrap();
        assert!(raw::max_abs(&(out.matrix() - reference.matrix())) < 1e-12);
        let _ = maximally_entangled_on;
    }
}
