use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::net::RewardNet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::mix_seed;

/// Independently initialized reward networks; the learned reward is their mean.
#[derive(Debug, Clone)]
pub struct RewardEnsemble<T> {
    members: Vec<RewardNet<T>>,
    optimizers: Vec<Option<Adam<T>>>,
    sessions: u64,
}

impl<T: Scalar> RewardEnsemble<T> {
    pub fn new(size: usize, input_dim: usize, hidden: usize, seed: u64) -> Self {
        assert!(size >= 1, "an ensemble needs at least one member");
        let members = (0..size)
            .map(|m| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[0x1a1f, m as u64]));
                RewardNet::new(input_dim, hidden, &mut rng)
            })
            .collect();
        Self::from_members(members).expect("freshly built members share dimensions")
    }

    pub fn from_members(members: Vec<RewardNet<T>>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::Config("an ensemble needs at least one member".into()))?;
        let (d, h) = (first.input_dim(), first.hidden());
        if members
            .iter()
            .any(|m| m.input_dim() != d || m.hidden() != h)
        {
            return Err(Error::Config("ensemble members differ in shape".into()));
        }
        let optimizers = vec![None; members.len()];
        Ok(Self {
            members,
            optimizers,
            sessions: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.members[0].input_dim()
    }

    pub fn hidden(&self) -> usize {
        self.members[0].hidden()
    }

    pub fn members(&self) -> &[RewardNet<T>] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut [RewardNet<T>] {
        &mut self.members
    }

    /// Number of completed training sessions.
    pub fn sessions(&self) -> u64 {
        self.sessions
    }

    pub(crate) fn training_parts(
        &mut self,
        lr: f64,
        betas: (f64, f64),
    ) -> impl Iterator<Item = (&mut RewardNet<T>, &mut Adam<T>)> {
        for (net, opt) in self.members.iter().zip(self.optimizers.iter_mut()) {
            match opt {
                Some(o) => o.set_learning_rate(lr),
                None => *opt = Some(Adam::new(net.params().len(), lr, betas)),
            }
        }
        self.members.iter_mut().zip(
            self.optimizers
                .iter_mut()
                .map(|o| o.as_mut().expect("initialized above")),
        )
    }

    pub(crate) fn finish_session(&mut self) {
        self.sessions += 1;
    }

    /// Mean of member rewards. Member outputs are summed in sorted order so the
    /// result does not depend on member order.
    pub fn predict_reward(&self, x: &[T]) -> Result<T> {
        let mut outs = self
            .members
            .iter()
            .map(|m| m.reward(x))
            .collect::<Result<Vec<T>>>()?;
        Ok(sorted_mean(&mut outs))
    }

    pub fn predict_return(&self, steps: &[Vec<T>]) -> Result<T> {
        let mut outs = self
            .members
            .iter()
            .map(|m| m.segment_return(steps))
            .collect::<Result<Vec<T>>>()?;
        Ok(sorted_mean(&mut outs))
    }
}

fn sorted_mean<T: Scalar>(values: &mut [T]) -> T {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let total: T = values.iter().copied().sum();
    total / T::of(values.len() as f64)
}
