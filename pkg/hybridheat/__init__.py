# Lyapunov exponents of switching stochastic heat equations
