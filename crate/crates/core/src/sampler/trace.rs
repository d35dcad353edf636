use super::{ChainOutput, SamplerError};

/// Per-chain sampler statistics after warm-up.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainStats {
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
    pub mean_accept: f64,
    pub mean_tree_depth: f64,
    pub divergences: usize,
    pub warmup_divergences: usize,
    pub max_depth_hits: usize,
    pub n_leapfrog: usize,
}

/// Posterior draws: latent coordinates followed by derived quantities, each
/// stored as `chains × draws` values in chain-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    names: Vec<String>,
    n_latent: usize,
    chains: usize,
    draws: usize,
    data: Vec<f64>,
    stats: Vec<ChainStats>,
}

impl Trace {
    /// Builds a trace from per-variable columns laid out `[variable][chain][draw]`.
    pub fn from_parts(
        names: Vec<String>,
        n_latent: usize,
        chains: usize,
        draws: usize,
        data: Vec<f64>,
    ) -> Result<Self, SamplerError> {
        if n_latent > names.len() {
            return Err(SamplerError::Trace("more latent names than names".into()));
        }
        if data.len() != names.len() * chains * draws {
            return Err(SamplerError::Trace(format!(
                "{} values for {} variables x {chains} chains x {draws} draws",
                data.len(),
                names.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(SamplerError::Trace(format!("duplicate variable `{dup}`")));
        }
        Ok(Self { names, n_latent, chains, draws, data, stats: vec![ChainStats::default(); chains] })
    }

    pub(crate) fn from_chain_outputs(names: Vec<String>, outputs: Vec<ChainOutput>) -> Result<Self, SamplerError> {
        let chains = outputs.len();
        let draws = outputs.first().map_or(0, |o| o.draws.len());
        let dim = names.len();
        let mut data = vec![0.0; dim * chains * draws];
        for (c, out) in outputs.iter().enumerate() {
            for (d, x) in out.draws.iter().enumerate() {
                for (v, &val) in x.iter().enumerate() {
                    data[(v * chains + c) * draws + d] = val;
                }
            }
        }
        let mut trace = Self::from_parts(names, dim, chains, draws, data)?;
        trace.stats = outputs.into_iter().map(|o| o.stats).collect();
        Ok(trace)
    }

    /// A single-variable trace from per-chain draws, for diagnostics.
    pub fn from_chains(name: &str, chains: &[Vec<f64>]) -> Result<Self, SamplerError> {
        let draws = chains.first().map_or(0, Vec::len);
        if chains.iter().any(|c| c.len() != draws) {
            return Err(SamplerError::Trace("chains have unequal lengths".into()));
        }
        Self::from_parts(vec![name.to_string()], 1, chains.len(), draws, chains.concat())
    }

    pub fn chains(&self) -> usize {
        self.chains
    }

    pub fn draws(&self) -> usize {
        self.draws
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn latent_names(&self) -> &[String] {
        &self.names[..self.n_latent]
    }

    pub fn derived_names(&self) -> &[String] {
        &self.names[self.n_latent..]
    }

    pub fn stats(&self) -> &[ChainStats] {
        &self.stats
    }

    pub fn set_stats(&mut self, stats: Vec<ChainStats>) {
        self.stats = stats;
    }

    pub fn total_divergences(&self) -> usize {
        self.stats.iter().map(|s| s.divergences).sum()
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// All draws of `name`, chain after chain.
    pub fn samples(&self, name: &str) -> Option<&[f64]> {
        let v = self.index_of(name)?;
        let n = self.chains * self.draws;
        Some(&self.data[v * n..(v + 1) * n])
    }

    /// Draws of `name` in one chain.
    pub fn chain(&self, name: &str, chain: usize) -> Option<&[f64]> {
        if chain >= self.chains {
            return None;
        }
        self.samples(name).map(|s| &s[chain * self.draws..(chain + 1) * self.draws])
    }

    /// Per-chain draws of `name`.
    pub fn chain_slices(&self, name: &str) -> Option<Vec<&[f64]>> {
        let s = self.samples(name)?;
        Some(s.chunks(self.draws.max(1)).collect())
    }

    /// Latent vector of one draw.
    pub fn point(&self, chain: usize, draw: usize) -> Vec<f64> {
        let n = self.chains * self.draws;
        (0..self.n_latent).map(|v| self.data[v * n + chain * self.draws + draw]).collect()
    }

    /// Appends derived variables computed from each latent point.
    pub fn add_derived(&mut self, names: &[String], f: impl Fn(&[f64]) -> Vec<f64>) -> Result<(), SamplerError> {
        if let Some(dup) = names.iter().find(|n| self.index_of(n).is_some()) {
            return Err(SamplerError::Trace(format!("variable `{dup}` already present")));
        }
        let n = self.chains * self.draws;
        let mut cols = vec![0.0; names.len() * n];
        for c in 0..self.chains {
            for d in 0..self.draws {
                let vals = f(&self.point(c, d));
                if vals.len() != names.len() {
                    return Err(SamplerError::Trace("derived function returned the wrong number of values".into()));
                }
                for (k, v) in vals.into_iter().enumerate() {
                    cols[k * n + c * self.draws + d] = v;
                }
            }
        }
        self.names.extend(names.iter().cloned());
        self.data.extend(cols);
        Ok(())
    }
}
