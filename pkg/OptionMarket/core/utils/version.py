TOOL_VERSION = 'v1.2.0'

# Updates Under Here
# Added the variance-reduction sweep command (rho / sigma sensitivity of the N2 trade),
# Clearing accepts CVaR bids through the membership oracle,
# Zero-surplus clearing writes the Newton iteration trace next to the trades,
# Extra unbounded peakers can be added to the example market as option-only sellers,
# Artifact headers record the RNG bit generator and numpy version
