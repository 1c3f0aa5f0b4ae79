ITERATION_KEY = "iteration"
DURATION_KEY = "dur_s"
RESIDUAL_KEY = "residual"
