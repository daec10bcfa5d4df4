/// Linear ramp of the low-frequency mask ratio over pretraining.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurriculumSchedule {
    pub total_steps: usize,
    pub max_ratio: f64,
}

impl CurriculumSchedule {
    pub fn new(total_steps: usize) -> Self {
        Self { total_steps, max_ratio: 0.5 }
    }
}

/// `max_ratio * step / total_steps`, clamped to `[0, max_ratio]`.
pub fn curriculum_ratio(step: usize, sched: &CurriculumSchedule) -> f64 {
    if sched.total_steps == 0 || step >= sched.total_steps {
        return sched.max_ratio;
    }
    sched.max_ratio * step as f64 / sched.total_steps as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_midpoint() {
        let s = CurriculumSchedule::new(2000);
        assert_eq!(curriculum_ratio(0, &s), 0.0);
        assert_eq!(curriculum_ratio(2000, &s), 0.5);
        assert_eq!(curriculum_ratio(1000, &s), 0.25);
        assert_eq!(curriculum_ratio(5000, &s), 0.5);
    }
}
