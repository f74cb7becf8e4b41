use std::collections::HashMap;
use std::rc::Rc;

use rand::seq::SliceRandom;

use crate::debias::Generator;
use crate::error::{Error, Result};
use crate::metrics::Rt60Estimator;
use crate::reverb::Dereverberator;
use crate::rng::{rng_for, tag};
use crate::synth::{AudioStore, ManifestEntry, Split};

/// Training-side view of a dataset: reverberant target clips and their
/// descriptors, with bounded caches of derived audio. Only `Audio` reads go
/// through the store here; anechoic sources are never touched.
pub struct TrainData<'a> {
    store: &'a AudioStore,
    train: Vec<ManifestEntry>,
    probe: Vec<ManifestEntry>,
    cache_limit: usize,
    derev: HashMap<(bool, usize), Rc<Vec<f32>>>,
    debiased: HashMap<usize, Rc<Vec<f32>>>,
    rt: HashMap<(bool, usize), f64>,
}

/// Which pool a clip index refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pool {
    Train,
    Probe,
}

impl<'a> TrainData<'a> {
    pub fn new(store: &'a AudioStore, probe_size: usize, cache_limit: usize) -> Result<Self> {
        let m = store.manifest();
        let train: Vec<ManifestEntry> = m.split(Split::Train).into_iter().cloned().collect();
        if train.is_empty() {
            return Err(Error::Manifest("train split is empty".into()));
        }
        let probe = m.split(Split::Val).into_iter().take(probe_size).cloned().collect();
        Ok(Self {
            store,
            train,
            probe,
            cache_limit,
            derev: HashMap::new(),
            debiased: HashMap::new(),
            rt: HashMap::new(),
        })
    }

    pub fn store(&self) -> &'a AudioStore {
        self.store
    }

    pub fn train_len(&self) -> usize {
        self.train.len()
    }

    pub fn probe_len(&self) -> usize {
        self.probe.len()
    }

    fn entry(&self, pool: Pool, i: usize) -> &ManifestEntry {
        match pool {
            Pool::Train => &self.train[i],
            Pool::Probe => &self.probe[i],
        }
    }

    pub fn descriptor(&self, pool: Pool, i: usize) -> &[f32] {
        self.entry(pool, i).descriptor.as_slice()
    }

    /// `n` train indices: concatenated fresh permutations, so no clip repeats
    /// within a pass over the split.
    pub fn epoch_indices(&self, seed: u64, label: &str, epoch: usize, n: usize) -> Vec<usize> {
        let mut rng = rng_for(seed, &[tag("epoch"), tag(label), epoch as u64]);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let mut perm: Vec<usize> = (0..self.train.len()).collect();
            perm.shuffle(&mut rng);
            out.extend(perm.into_iter().take(n - out.len()));
        }
        out
    }

    /// Reverberant target audio `A_t`.
    pub fn target(&self, pool: Pool, i: usize) -> Result<Vec<f32>> {
        Ok(self.store.audio(self.entry(pool, i))?.samples)
    }

    fn key(pool: Pool, i: usize) -> (bool, usize) {
        (pool == Pool::Probe, i)
    }

    /// `derev(A_t)`; the dereverberator is frozen once trained, so results are cached.
    pub fn dereverberated(&mut self, pool: Pool, i: usize, derev: &Dereverberator) -> Result<Rc<Vec<f32>>> {
        let k = Self::key(pool, i);
        if let Some(v) = self.derev.get(&k) {
            return Ok(v.clone());
        }
        let v = Rc::new(derev.dereverberate(&self.target(pool, i)?)?);
        if self.derev.len() < self.cache_limit {
            self.derev.insert(k, v.clone());
        }
        Ok(v)
    }

    /// Estimated RT60 of `A_t`, the reference of the residue metric.
    pub fn target_rt60(&mut self, pool: Pool, i: usize, est: &Rt60Estimator) -> Result<f64> {
        let k = Self::key(pool, i);
        if let Some(&v) = self.rt.get(&k) {
            return Ok(v);
        }
        let v = est.estimate_seconds(&self.target(pool, i)?)?;
        self.rt.insert(k, v);
        Ok(v)
    }

    /// `G(derev(A_t))` for a frozen generator. Call [`TrainData::clear_debiased`]
    /// whenever the generator changes.
    pub fn debiased(
        &mut self,
        idx: &[usize],
        derev: &Dereverberator,
        g: &Generator,
    ) -> Result<Vec<Rc<Vec<f32>>>> {
        let missing: Vec<usize> = idx.iter().copied().filter(|i| !self.debiased.contains_key(i)).collect();
        let mut fresh = HashMap::new();
        if !missing.is_empty() {
            let inputs = missing
                .iter()
                .map(|&i| self.dereverberated(Pool::Train, i, derev))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&[f32]> = inputs.iter().map(|v| v.as_slice()).collect();
            for (i, y) in missing.iter().zip(g.forward_batch(&refs)?) {
                fresh.insert(*i, Rc::new(y));
            }
        }
        let mut out = Vec::with_capacity(idx.len());
        for i in idx {
            let v = match self.debiased.get(i) {
                Some(v) => v.clone(),
                None => fresh[i].clone(),
            };
            out.push(v);
        }
        for (i, v) in fresh {
            if self.debiased.len() < self.cache_limit {
                self.debiased.insert(i, v);
            }
        }
        Ok(out)
    }

    pub fn clear_debiased(&mut self) {
        self.debiased.clear();
    }
}
