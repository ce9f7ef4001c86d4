# Numerical kernel: dense linear algebra, ODE integration, quadrature
