use crate::ode::Trajectory;

use super::{CompartmentLayout, ModelError};

/// Number currently infected, `I(t)`, at every output time.
pub fn prevalence(traj: &Trajectory, layout: &CompartmentLayout) -> Result<Vec<f64>, ModelError> {
    Ok(traj.column(layout.index_of("I")?))
}

/// New entries into `I` per day, `C(t_j) - C(t_{j-1})` with `C(t0) = 0`.
///
/// `traj.ts` must be the daily grid `t0 + 1, t0 + 2, ...`.
pub fn incidence(
    traj: &Trajectory,
    layout: &CompartmentLayout,
    t0: f64,
) -> Result<Vec<f64>, ModelError> {
    let c = layout.index_of("C")?;
    for (j, t) in traj.ts.iter().enumerate() {
        if (t - (t0 + (j + 1) as f64)).abs() > 1e-9 {
            return Err(ModelError::GridMismatch { t0, index: j });
        }
    }
    let mut previous = 0.0;
    Ok(traj
        .states
        .iter()
        .map(|row| {
            let delta = row[c] - previous;
            previous = row[c];
            delta
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(ts: Vec<f64>, c: &[f64]) -> Trajectory {
        Trajectory {
            ts,
            states: c.iter().map(|&v| vec![0.0, 0.0, 3.0, 0.0, v]).collect(),
        }
    }

    #[test]
    fn constant_cumulative_flux_has_zero_incidence() {
        let t = traj(vec![1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]);
        assert_eq!(incidence(&t, &CompartmentLayout::seir(), 0.0).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn incidence_telescopes_to_final_cumulative() {
        let c = [1.5, 4.0, 4.25, 10.0, 19.5];
        let t = traj((1..=5).map(f64::from).collect(), &c);
        let inc = incidence(&t, &CompartmentLayout::seir(), 0.0).unwrap();
        assert_eq!(inc[0], 1.5);
        assert!((inc.iter().sum::<f64>() - 19.5).abs() < 1e-12);
    }

    #[test]
    fn non_daily_grid_is_rejected() {
        let t = traj(vec![1.0, 2.5], &[1.0, 2.0]);
        assert_eq!(
            incidence(&t, &CompartmentLayout::seir(), 0.0),
            Err(ModelError::GridMismatch { t0: 0.0, index: 1 })
        );
        let shifted = traj(vec![2.0, 3.0], &[1.0, 2.0]);
        assert!(incidence(&shifted, &CompartmentLayout::seir(), 0.0).is_err());
    }

    #[test]
    fn prevalence_reads_the_infected_column() {
        let t = traj(vec![1.0], &[0.0]);
        assert_eq!(prevalence(&t, &CompartmentLayout::seir()).unwrap(), vec![3.0]);
        assert!(incidence(&t, &CompartmentLayout::sir(), 0.0).is_err());
    }
}
