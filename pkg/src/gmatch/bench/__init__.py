"""Evaluation protocols (fixed time, fixed target, profiles), generators and the runner."""

from .generators import (gen_caltech_style, gen_house_style, caltech_ground_truth, knn_pairs,
                         random_problem, random_suite)
from .metrics import (DEFAULT_BUDGETS, BenchmarkSuite, ProfileTable, accuracy, default_taus,
                      fixed_target_times, fixed_time_report, performance_profile, state_at,
                      within_tolerance, write_fixed_time_csv, write_profile_csv)
from .runner import BenchmarkResult, generate_suite, load_runs, load_suite, run_benchmark

__all__ = [
    "gen_caltech_style", "gen_house_style", "caltech_ground_truth", "knn_pairs",
    "random_problem", "random_suite",
    "DEFAULT_BUDGETS", "BenchmarkSuite", "ProfileTable", "accuracy", "default_taus",
    "fixed_target_times", "fixed_time_report", "performance_profile", "state_at",
    "within_tolerance", "write_fixed_time_csv", "write_profile_csv",
    "BenchmarkResult", "generate_suite", "load_runs", "load_suite", "run_benchmark",
]
