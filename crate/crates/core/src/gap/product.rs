use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::{k1_construct, line_distance, Error, Norm, Region, Result, SymmetricGAP};
use crate::num::{self, Rational};

/// `×_j [K₁(u^{(j)})]_{δ_j}`: one block of scalar generators per coordinate.
///
/// A block may be empty, in which case its factor is `[{0}]_{δ_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductK1 {
    #[serde(with = "blocks_serde")]
    blocks: Vec<Vec<Rational>>,
    #[serde(with = "num::serde_rational_vec")]
    deltas: Vec<Rational>,
}

impl ProductK1 {
    pub fn new(blocks: Vec<Vec<Rational>>, deltas: Vec<Rational>) -> Result<Self> {
        if blocks.is_empty() || blocks.len() != deltas.len() {
            return Err(Error::DimensionMismatch);
        }
        if let Some(d) = deltas.iter().find(|d| d.is_negative()) {
            return Err(Error::NegativeTolerance(num::to_f64(d)));
        }
        Ok(ProductK1 { blocks, deltas })
    }

    pub fn blocks(&self) -> &[Vec<Rational>] {
        &self.blocks
    }

    pub fn deltas(&self) -> &[Rational] {
        &self.deltas
    }

    /// `R = Σ r_j`.
    pub fn rank(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// Distance from a scalar to `K₁(u^{(j)})`.
    fn block_distance(&self, j: usize, x: &Rational) -> Rational {
        let block = &self.blocks[j];
        match block.len() {
            0 => x.abs(),
            1 => line_distance(x, &block[0], 1),
            _ => {
                // every sign pattern; blocks stay small
                let mut sums = vec![Rational::zero()];
                for u in block {
                    let mut next = Vec::with_capacity(sums.len() * 3);
                    for s in &sums {
                        next.push(s - u);
                        next.push(s.clone());
                        next.push(s + u);
                    }
                    sums = next;
                }
                sums.iter().map(|s| (x - s).abs()).min().expect("nonempty")
            }
        }
    }

    /// `K₁(u)` in `Rᵈ` whose generators are the block generators placed on
    /// their coordinate axes, so each has exactly one nonzero coordinate
    /// (zero generators stay zero vectors). Its points are the product of the
    /// block point sets. `None` when every block is empty.
    pub fn combined(&self) -> Option<SymmetricGAP> {
        let d = self.blocks.len();
        let gens: Vec<Vec<Rational>> = self
            .blocks
            .iter()
            .enumerate()
            .flat_map(|(j, block)| {
                block.iter().map(move |u| {
                    let mut g = vec![Rational::zero(); d];
                    g[j] = u.clone();
                    g
                })
            })
            .collect();
        if gens.is_empty() {
            None
        } else {
            Some(k1_construct(gens).expect("valid generators"))
        }
    }
}

impl Region for ProductK1 {
    fn dim(&self) -> usize {
        self.blocks.len()
    }

    /// The neighbourhood of a product set splits by coordinate: the excess
    /// `e_j = max(0, dist(x_j, K₁(u^{(j)})) − δ_j)` is the distance per axis,
    /// combined by the chosen norm.
    fn within(&self, x: &[Rational], tol: &Rational, norm: Norm) -> bool {
        let excess = (0..self.blocks.len()).map(|j| {
            let e = self.block_distance(j, &x[j]) - &self.deltas[j];
            if e.is_negative() {
                Rational::zero()
            } else {
                e
            }
        });
        match norm {
            Norm::Max => excess.into_iter().all(|e| e <= *tol),
            Norm::Euclidean => excess.map(|e| &e * &e).sum::<Rational>() <= tol * tol,
        }
    }
}

mod blocks_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(blocks: &[Vec<Rational>], s: S) -> std::result::Result<S::Ok, S::Error> {
        let text: Vec<Vec<String>> = blocks
            .iter()
            .map(|b| b.iter().map(num::format_rational).collect())
            .collect();
        text.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<Rational>>, D::Error> {
        use serde::de::Error as _;
        let raw: Vec<Vec<serde_json::Value>> = Vec::deserialize(d)?;
        raw.iter()
            .map(|b| b.iter().map(|v| num::from_json(v).map_err(D::Error::custom)).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::AtomicMeasure;
    use crate::gap::measure_outside;
    use crate::num::{int, ratio};

    #[test]
    fn one_dimension_is_the_neighbourhood() {
        let p = ProductK1::new(vec![vec![int(2)]], vec![ratio(1, 4)]).unwrap();
        let k = k1_construct(vec![vec![int(2)]]).unwrap().region(10).unwrap();
        for x in -12..=12 {
            let x = ratio(x, 4);
            let direct = k.distance_1d(&x) <= ratio(1, 4);
            assert_eq!(p.within(&[x], &int(0), Norm::Max), direct);
        }
    }

    #[test]
    fn planar_grid() {
        let p = ProductK1::new(vec![vec![int(1)], vec![int(1)]], vec![int(0), int(0)]).unwrap();
        let mut inside = 0;
        for x in -3..=3 {
            for y in -3..=3 {
                if p.within(&[int(x), int(y)], &int(0), Norm::Euclidean) {
                    inside += 1;
                    assert!(x.abs() <= 1 && y.abs() <= 1);
                }
            }
        }
        assert_eq!(inside, 9);
    }

    #[test]
    fn combined_generators_sit_on_axes() {
        let p = ProductK1::new(
            vec![vec![int(1), int(5)], vec![], vec![ratio(1, 2)]],
            vec![int(0); 3],
        )
        .unwrap();
        let k = p.combined().unwrap();
        assert_eq!(k.rank(), p.rank());
        assert_eq!(k.rank(), 3);
        for g in k.generators() {
            assert_eq!(g.iter().filter(|x| !x.is_zero()).count(), 1);
        }
        // same point set as the product region with δ = 0
        let pts = k.points(1000).unwrap();
        assert_eq!(pts.len(), 9 * 3);
        for q in &pts {
            assert!(p.within(q, &int(0), Norm::Max));
        }
        assert!(ProductK1::new(vec![vec![], vec![]], vec![int(0); 2]).unwrap().combined().is_none());
    }

    #[test]
    fn outside_mass_on_axes() {
        let a = crate::dist::WeightVector::new(
            2,
            vec![vec![int(1), int(0)], vec![int(0), int(3)], vec![int(0), int(7)]],
        )
        .unwrap();
        let m = AtomicMeasure::levy_base(&a);
        let p = ProductK1::new(vec![vec![int(1)], vec![int(3)]], vec![int(0), int(0)]).unwrap();
        assert_eq!(measure_outside(&m, &p, &int(0), Norm::Euclidean).unwrap(), int(2));
        let wide = ProductK1::new(vec![vec![int(1)], vec![int(3)]], vec![int(0), int(4)]).unwrap();
        assert_eq!(measure_outside(&m, &wide, &int(0), Norm::Euclidean).unwrap(), int(0));
    }
}
