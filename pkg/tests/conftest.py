from hypothesis import HealthCheck, settings

# Property tests run numeric kernels whose first call may pay numpy warmup
# costs; wall-clock deadlines just make that flaky.
settings.register_profile(
    "suite",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")
