//! Scenario file schema (JSON, `schema: 1`).
//!
//! Matrices are row-major with explicit dimension fields. Function
//! descriptors are tagged by `kind`.

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use logpos_core::envelope::InnerBody;
use logpos_core::geom::{Ball, ConvexBody, Halfspace, Polytope};
use logpos_core::model::{AffinePiece, LogConcaveFn, Profile1D};
use logpos_core::positions::MarginCfg;
use logpos_core::solver::SolveOptions;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub data: Vec<f64>,
}

impl MatrixSpec {
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            bail!(
                "matrix data length {} does not match {}x{}",
                self.data.len(),
                self.rows,
                self.cols
            );
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        MatrixSpec {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HalfspaceSpec {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum BodySpec {
    Polytope {
        dim: usize,
        halfspaces: Vec<HalfspaceSpec>,
    },
    Cube {
        dim: usize,
        radius: f64,
    },
    Interval {
        a: f64,
        b: f64,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
}

impl BodySpec {
    pub fn to_body(&self) -> Result<ConvexBody> {
        Ok(match self {
            BodySpec::Polytope { dim, halfspaces } => {
                let hs = halfspaces
                    .iter()
                    .map(|h| {
                        if h.normal.len() != *dim {
                            bail!("halfspace normal has wrong dimension");
                        }
                        Ok(Halfspace {
                            normal: DVector::from_vec(h.normal.clone()),
                            offset: h.offset,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                ConvexBody::Polytope(Polytope::new(*dim, hs))
            }
            BodySpec::Cube { dim, radius } => ConvexBody::Polytope(Polytope::cube(*dim, *radius)),
            BodySpec::Interval { a, b } => ConvexBody::Polytope(Polytope::interval(*a, *b)),
            BodySpec::Ball { center, radius } => ConvexBody::Ball(Ball {
                center: DVector::from_vec(center.clone()),
                radius: *radius,
            }),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProfileSpec {
    Linear { slope: f64 },
    Power { coeff: f64, exponent: f64 },
    InverseGap { scale: f64 },
    NegLogGap { scale: f64 },
}

impl ProfileSpec {
    fn to_profile(&self) -> Profile1D {
        match self {
            ProfileSpec::Linear { slope } => Profile1D::Linear { slope: *slope },
            ProfileSpec::Power { coeff, exponent } => Profile1D::PowerLaw {
                coeff: *coeff,
                exponent: *exponent,
            },
            ProfileSpec::InverseGap { scale } => Profile1D::InverseGap { scale: *scale },
            ProfileSpec::NegLogGap { scale } => Profile1D::NegLogGap { scale: *scale },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    Indicator {
        body: BodySpec,
        #[serde(default)]
        ln_scale: f64,
    },
    Gaussian {
        dim: usize,
        center: Vec<f64>,
        precision: MatrixSpec,
        #[serde(default)]
        ln_scale: f64,
    },
    Radial {
        dim: usize,
        profile: ProfileSpec,
        #[serde(default)]
        ln_scale: f64,
    },
    QconcavePower {
        dim: usize,
        exponent: f64,
        #[serde(default)]
        ln_scale: f64,
    },
    ExponentialNorm {
        dim: usize,
        norm: MatrixSpec,
        #[serde(default)]
        ln_scale: f64,
    },
    Piecewise {
        dim: usize,
        pieces: Vec<PieceSpec>,
        #[serde(default)]
        domain: Option<BodySpec>,
        #[serde(default)]
        ln_scale: f64,
    },
    Restricted {
        base: Box<FunctionSpec>,
        domain: BodySpec,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PieceSpec {
    pub grad: Vec<f64>,
    pub offset: f64,
}

impl FunctionSpec {
    pub fn to_function(&self) -> Result<LogConcaveFn> {
        Ok(match self {
            FunctionSpec::Indicator { body, ln_scale } => {
                LogConcaveFn::indicator(body.to_body()?).scaled(*ln_scale)
            }
            FunctionSpec::Gaussian {
                dim,
                center,
                precision,
                ln_scale,
            } => {
                if center.len() != *dim {
                    bail!("gaussian center has wrong dimension");
                }
                let p = precision.to_matrix()?;
                if p.nrows() != *dim || p.ncols() != *dim {
                    bail!("gaussian precision has wrong shape");
                }
                LogConcaveFn::gaussian(DVector::from_vec(center.clone()), p).scaled(*ln_scale)
            }
            FunctionSpec::Radial {
                dim,
                profile,
                ln_scale,
            } => LogConcaveFn::radial(*dim, profile.to_profile()).scaled(*ln_scale),
            FunctionSpec::QconcavePower {
                dim,
                exponent,
                ln_scale,
            } => LogConcaveFn::qconcave_power(*dim, *exponent).scaled(*ln_scale),
            FunctionSpec::ExponentialNorm {
                dim,
                norm,
                ln_scale,
            } => {
                let m = norm.to_matrix()?;
                if m.nrows() != *dim || m.ncols() != *dim {
                    bail!("norm matrix has wrong shape");
                }
                LogConcaveFn::exponential_norm(m).scaled(*ln_scale)
            }
            FunctionSpec::Piecewise {
                dim,
                pieces,
                domain,
                ln_scale,
            } => {
                let ps = pieces
                    .iter()
                    .map(|p| {
                        if p.grad.len() != *dim {
                            bail!("piece gradient has wrong dimension");
                        }
                        Ok(AffinePiece {
                            grad: DVector::from_vec(p.grad.clone()),
                            offset: p.offset,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let dom = match domain {
                    Some(b) => match b.to_body()? {
                        ConvexBody::Polytope(p) => Some(p),
                        ConvexBody::Ball(_) => bail!("piecewise domain must be a polytope"),
                    },
                    None => None,
                };
                LogConcaveFn::piecewise(*dim, ps, dom).scaled(*ln_scale)
            }
            FunctionSpec::Restricted { base, domain } => {
                LogConcaveFn::restricted(base.to_function()?, domain.to_body()?)
            }
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomSpec {
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InnerSpec {
    Atoms { dim: usize, atoms: Vec<AtomSpec> },
    Function(FunctionSpec),
}

impl InnerSpec {
    pub fn to_inner(&self) -> Result<InnerBody> {
        Ok(match self {
            InnerSpec::Atoms { dim, atoms } => InnerBody::Atoms {
                dim: *dim,
                atoms: atoms
                    .iter()
                    .map(|a| {
                        if a.x.len() != *dim {
                            bail!("atom has wrong dimension");
                        }
                        Ok((DVector::from_vec(a.x.clone()), a.value))
                    })
                    .collect::<Result<Vec<_>>>()?,
            },
            InnerSpec::Function(f) => InnerBody::Function(f.to_function()?),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct SolverSpec {
    pub max_outer_iters: Option<usize>,
    pub tol_feas: Option<f64>,
    pub tol_obj: Option<f64>,
    pub pd_floor: Option<f64>,
    pub cut_budget_per_dim: Option<usize>,
    pub grid_n: Option<usize>,
    pub tol_contact: Option<f64>,
    pub cert_tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct OutputSpec {
    pub result: Option<String>,
    pub certificate: Option<String>,
    pub profile: Option<String>,
    pub validation: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub schema: u32,
    /// "john" or "lowner".
    pub problem: String,
    pub s: f64,
    #[serde(default)]
    pub fixed_center: bool,
    pub f: FunctionSpec,
    pub g: InnerSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub outputs: OutputSpec,
}

impl Scenario {
    pub fn load(path: &std::path::Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading scenario {}", path.display()))?;
        let sc: Scenario = serde_json::from_str(&text).context("parsing scenario JSON")?;
        if sc.schema != SCHEMA_VERSION {
            bail!(
                "unsupported schema version {} (expected {})",
                sc.schema,
                SCHEMA_VERSION
            );
        }
        if sc.problem != "john" && sc.problem != "lowner" {
            bail!("problem must be \"john\" or \"lowner\"");
        }
        if sc.s <= 0.0 {
            bail!("s must be positive");
        }
        Ok(sc)
    }

    pub fn solve_options(&self, seed_override: Option<u64>) -> SolveOptions {
        let mut opts = SolveOptions {
            s: self.s,
            fixed_center: self.fixed_center,
            seed: seed_override.unwrap_or(self.seed),
            ..SolveOptions::default()
        };
        if let Some(v) = self.solver.max_outer_iters {
            opts.max_outer_iters = v;
        }
        if let Some(v) = self.solver.tol_feas {
            opts.tol_feas = v;
        }
        if let Some(v) = self.solver.tol_obj {
            opts.tol_obj = v;
        }
        if let Some(v) = self.solver.pd_floor {
            opts.pd_floor = v;
        }
        if let Some(v) = self.solver.cut_budget_per_dim {
            opts.cut_budget_per_dim = v;
        }
        let mut margin = MarginCfg::default();
        if let Some(v) = self.solver.grid_n {
            margin.grid_n = v;
        }
        if let Some(v) = self.solver.tol_contact {
            margin.tol_contact = v;
        }
        opts.margin = margin;
        opts.quad.seed = opts.seed ^ 0x5eed;
        opts
    }

    pub fn cert_tol(&self, f: &LogConcaveFn) -> f64 {
        if let Some(v) = self.solver.cert_tol {
            return v;
        }
        // exact-form kinds certify to 1e-7; numeric margins are looser
        if matches!(
            f.kind,
            logpos_core::model::FnKind::Indicator(_) | logpos_core::model::FnKind::Gaussian { .. }
        ) {
            1e-7
        } else {
            1e-5
        }
    }
}

pub fn dim_check(f: &LogConcaveFn, g: &InnerBody) -> Result<()> {
    if f.dim != g.dim() {
        return Err(anyhow!(
            "f has dimension {} but g has dimension {}",
            f.dim,
            g.dim()
        ));
    }
    Ok(())
}
