# Closed-form work on attribute distributions: combine, compare, bound.

from probkg import convolve, fuse, jsd, jsd_lower_bound, moments, parse_distribution
from probkg.distributions import coarsen, pooled_grid, prob_mass, format_distribution

motor = parse_distribution("gmm(0.6:N(62,2);0.4:N(70,3))")
sensor = parse_distribution("gmm(1.0:N(64,1.5))")

print("motor temperature:", format_distribution(motor))
print("  mean/var:", moments(motor))
print("  P(60 <= T <= 68):", round(prob_mass(motor, 60, 68), 6))

# measurement = signal + independent noise
noise = parse_distribution("gmm(1.0:N(0,0.25))")
print("\nafter noise:", format_distribution(convolve(motor, noise)))

# two independent estimates of the same quantity -> normalized product
fused = fuse(motor, sensor)
print("fused with sensor:", format_distribution(fused))
print("  fused mean/var:", moments(fused))

# divergence: exact quadrature vs the certified coarsened lower bound
d = jsd(motor, sensor, method="quadrature")
grid = pooled_grid(motor, sensor, bins=16)
lower = jsd_lower_bound(motor, sensor, grid)
print(f"\nJSD(motor, sensor) = {d:.6f},  coarsened lower bound = {lower:.6f}")
assert lower <= d + 1e-12

# the bound is what the similarity join prunes with: a pair whose *bound*
# already exceeds theta can never be similar, no quadrature needed
hist_a = coarsen(motor, grid)
hist_b = coarsen(sensor, grid)
print("coarsened histograms share edges:", hist_a.edges == hist_b.edges)
