/// Patience-based early stopping on a validation metric where higher is better.
///
/// Only strict improvements reset patience. A round that ties the best value
/// becomes the new best round, so among equally scored rounds the latest one
/// is kept.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_round: Option<usize>,
    wait: usize,
    rounds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observation {
    /// New best; the caller should snapshot its state.
    Improved,
    NoImprovement,
    /// `patience` consecutive rounds without improvement.
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience: patience.max(1),
            best: f64::NEG_INFINITY,
            best_round: None,
            wait: 0,
            rounds: 0,
        }
    }

    pub fn observe(&mut self, metric: f64) -> Observation {
        let round = self.rounds;
        self.rounds += 1;
        if metric > self.best {
            self.best = metric;
            self.best_round = Some(round);
            self.wait = 0;
            return Observation::Improved;
        }
        if metric == self.best {
            self.best_round = Some(round);
        }
        self.wait += 1;
        if self.wait >= self.patience {
            Observation::Stop
        } else {
            Observation::NoImprovement
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// 0-based index of the best round so far.
    pub fn best_round(&self) -> Option<usize> {
        self.best_round
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patience_one_flat_metric_stops_after_two_rounds() {
        let mut es = EarlyStopping::new(1);
        let mut trained = 0;
        for _ in 0..100 {
            trained += 1;
            if es.observe(0.7) == Observation::Stop {
                break;
            }
        }
        assert_eq!(trained, 2);
        assert_eq!(es.best_round(), Some(1));
    }

    #[test]
    fn improvement_resets_wait() {
        let mut es = EarlyStopping::new(2);
        let seq = [0.1, 0.1, 0.2, 0.2, 0.2];
        let obs: Vec<Observation> = seq.iter().map(|&m| es.observe(m)).collect();
        assert_eq!(obs[1], Observation::NoImprovement);
        assert_eq!(obs[2], Observation::Improved);
        assert_eq!(obs[4], Observation::Stop);
        assert_eq!(es.best_round(), Some(4));
        assert_eq!(es.best(), 0.2);
    }

    #[test]
    fn nan_never_improves() {
        let mut es = EarlyStopping::new(3);
        assert_eq!(es.observe(f64::NAN), Observation::NoImprovement);
        assert_eq!(es.best_round(), None);
    }
}
