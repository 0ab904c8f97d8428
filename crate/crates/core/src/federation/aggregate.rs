use rand::seq::index;
use rand::Rng;

use crate::detector::{discriminator_loss, generator_loss, sample_latents, DiscBatch, GanModel};
use crate::{Error, Result};

/// Dataset-size weighted average of the selected models.
pub fn aggregate(models: &[(&GanModel, usize)]) -> Result<GanModel> {
    let (first, _) = models.first().ok_or_else(|| Error::Empty("aggregation set".into()))?;
    if models.iter().any(|(m, _)| !m.same_architecture(first)) {
        return Err(Error::Shape("cannot aggregate models with different architectures".into()));
    }
    let total: usize = models.iter().map(|(_, n)| n).sum();
    if total == 0 {
        return Err(Error::InvalidArgument("aggregation weights sum to zero".into()));
    }
    let weights: Vec<f64> = models.iter().map(|(_, n)| *n as f64 / total as f64).collect();
    let mut out = (*first).clone();
    let average = |pick: fn(&GanModel) -> &[f64], dst: &mut [f64]| {
        for (i, v) in dst.iter_mut().enumerate() {
            *v = models.iter().zip(&weights).map(|((m, _), w)| w * pick(m)[i]).sum::<f64>();
        }
    };
    average(|m| m.theta.as_slice(), out.theta.as_mut_slice());
    average(|m| m.w.as_slice(), out.w.as_mut_slice());
    Ok(out)
}

/// Held-out rows plus the latents and interpolation weights used to evaluate
/// losses on them, fixed so that repeated evaluations are comparable.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalBatch {
    pub real: Vec<Vec<f64>>,
    pub latents: Vec<Vec<f64>>,
    pub mix: Vec<f64>,
}

impl EvalBatch {
    /// `size` rows drawn without replacement (all rows if fewer).
    pub fn sample<R: Rng + ?Sized>(rows: &[Vec<f64>], size: usize, latent_dim: usize, rng: &mut R) -> Result<Self> {
        if rows.is_empty() || size == 0 {
            return Err(Error::Empty("evaluation rows".into()));
        }
        let size = size.min(rows.len());
        let real: Vec<Vec<f64>> = index::sample(rng, rows.len(), size).iter().map(|i| rows[i].clone()).collect();
        let latents = sample_latents(size, latent_dim, rng);
        let mix = (0..size).map(|_| rng.random()).collect();
        Ok(Self { real, latents, mix })
    }

    pub fn disc_batch(&self, gan: &GanModel) -> Result<DiscBatch> {
        let fake: Vec<Vec<f64>> = self.latents.iter().map(|z| gan.generate(z)).collect::<Result<_>>()?;
        let interp = self
            .real
            .iter()
            .zip(&fake)
            .zip(&self.mix)
            .map(|((r, f), u)| r.iter().zip(f).map(|(a, b)| u * a + (1.0 - u) * b).collect())
            .collect();
        Ok(DiscBatch { real: self.real.clone(), fake, interp })
    }
}

/// Mean critic and generator losses over the given models, each evaluated on
/// its own batch.
pub fn global_losses(models: &[&GanModel], batches: &[&EvalBatch], gp_coeff: f64) -> Result<(f64, f64)> {
    if models.is_empty() {
        return Err(Error::Empty("selection".into()));
    }
    if models.len() != batches.len() {
        return Err(Error::Shape("one evaluation batch per model required".into()));
    }
    let mut ld = 0.0;
    let mut lg = 0.0;
    for (m, b) in models.iter().zip(batches) {
        let batch = b.disc_batch(m)?;
        ld += discriminator_loss(m, &batch, gp_coeff)?;
        lg += generator_loss(m, &batch.fake)?;
    }
    let n = models.len() as f64;
    Ok((ld / n, lg / n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ParamVector;
    use crate::rng::Streams;
    use proptest::prelude::*;
    use rand::Rng;

    fn model(seed: u64) -> GanModel {
        GanModel::with_architecture(3, 4, &[5], &mut Streams::new(seed).global("g")).unwrap()
    }

    fn filled(base: &GanModel, v: f64) -> GanModel {
        let mut m = base.clone();
        m.theta = ParamVector(vec![v; m.theta.len()]);
        m.w = ParamVector(vec![v; m.w.len()]);
        m
    }

    #[test]
    fn weighted_mean_examples() {
        let base = model(0);
        let (a, b) = (filled(&base, 0.0), filled(&base, 2.0));
        let g = aggregate(&[(&a, 5), (&b, 5)]).unwrap();
        assert!(g.theta.as_slice().iter().chain(g.w.as_slice()).all(|v| *v == 1.0));
        let b = filled(&base, 4.0);
        let g = aggregate(&[(&a, 1), (&b, 3)]).unwrap();
        assert!(g.theta.as_slice().iter().all(|v| *v == 3.0));
        assert_eq!(aggregate(&[(&base, 7)]).unwrap(), base);
        assert!(aggregate(&[]).is_err());
        let other = GanModel::with_architecture(3, 4, &[6], &mut Streams::new(1).global("g")).unwrap();
        assert!(aggregate(&[(&base, 1), (&other, 1)]).is_err());
    }

    fn batch(seed: u64) -> EvalBatch {
        let mut rng = Streams::new(seed).global("rows");
        let rows: Vec<Vec<f64>> = (0..30).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        EvalBatch::sample(&rows, 8, 4, &mut rng).unwrap()
    }

    #[test]
    fn global_losses_average_local_ones() {
        let (m1, m2) = (model(1), model(2));
        let (b1, b2) = (batch(1), batch(2));
        let local = |m: &GanModel, b: &EvalBatch| {
            let db = b.disc_batch(m).unwrap();
            (discriminator_loss(m, &db, 10.0).unwrap(), generator_loss(m, &db.fake).unwrap())
        };
        let single = global_losses(&[&m1], &[&b1], 10.0).unwrap();
        assert_eq!(single, local(&m1, &b1));
        let dup = global_losses(&[&m1, &m1], &[&b1, &b1], 10.0).unwrap();
        assert!((dup.0 - single.0).abs() < 1e-12 && (dup.1 - single.1).abs() < 1e-12);

        // independent re-evaluation straight from the loss definitions
        let by_hand = |m: &GanModel, b: &EvalBatch| {
            let mut ld = 0.0;
            let mut lg = 0.0;
            for ((x, z), u) in b.real.iter().zip(&b.latents).zip(&b.mix) {
                let f = m.generate(z).unwrap();
                let xi: Vec<f64> = x.iter().zip(&f).map(|(a, c)| u * a + (1.0 - u) * c).collect();
                let g = crate::nn::grad_input(&m.disc_spec, &m.w, &xi).unwrap();
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                ld += m.critic(&f).unwrap() - m.critic(x).unwrap() + 10.0 * (norm - 1.0).powi(2);
                lg -= m.critic(&f).unwrap();
            }
            let k = b.real.len() as f64;
            (ld / k, lg / k)
        };
        let (h1, h2) = (by_hand(&m1, &b1), by_hand(&m2, &b2));
        let both = global_losses(&[&m1, &m2], &[&b1, &b2], 10.0).unwrap();
        assert!((both.0 - 0.5 * (h1.0 + h2.0)).abs() < 1e-10);
        assert!((both.1 - 0.5 * (h1.1 + h2.1)).abs() < 1e-10);
        assert!(global_losses(&[], &[], 10.0).is_err());
    }

    proptest! {
        #[test]
        fn aggregation_is_convex(seeds in proptest::collection::vec(any::<u64>(), 1..5), sizes in proptest::collection::vec(1usize..500, 5)) {
            let models: Vec<GanModel> = seeds.iter().map(|s| model(*s)).collect();
            let pairs: Vec<(&GanModel, usize)> = models.iter().zip(&sizes).map(|(m, n)| (m, *n)).collect();
            let g = aggregate(&pairs).unwrap();
            for i in 0..g.w.len() {
                let lo = models.iter().map(|m| m.w.as_slice()[i]).fold(f64::INFINITY, f64::min);
                let hi = models.iter().map(|m| m.w.as_slice()[i]).fold(f64::NEG_INFINITY, f64::max);
                let v = g.w.as_slice()[i];
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
            let equal: Vec<(&GanModel, usize)> = models.iter().map(|m| (m, 3)).collect();
            let g = aggregate(&equal).unwrap();
            for i in 0..g.theta.len() {
                let mean = models.iter().map(|m| m.theta.as_slice()[i]).sum::<f64>() / models.len() as f64;
                prop_assert!((g.theta.as_slice()[i] - mean).abs() <= 1e-12);
            }
        }
    }
}
