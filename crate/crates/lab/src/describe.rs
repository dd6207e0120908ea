use crate::config::Kind;
use crate::error::LabResult;

/// A text card naming the result an experiment exercises and its thresholds.
pub fn card(kind: Kind) -> &'static str {
    match kind {
        Kind::Dk => "\
dk: Darling-Kac law for a map with a barely infinite right cusp
Result: Darling-Kac theorem. S_n(M)/c(n) converges strongly in distribution to the
normalized Mittag-Leffler law ML(alpha), alpha = 1/p0.
Defaults: M = (c, 1), uniform initial point, geometric checkpoints.
Hypothesis: p1 = 1, otherwise exit code 2.
Thresholds: KS against ML(1/2) <= 0.15 at n = 1e6 over 2000 trials
(c = 1/2, p0 = 2), and KS(1e6) < KS(1e4). For alpha = 1 the median of
S_n(M)/c(n) lies in [0.7, 1.3].
Tables: normalizer.csv, sample.csv, traces.csv.
",
        Kind::Ratio => "\
ratio: occupation ratio R_n = S_n(A)/S_n(B) of the two cusps
Result: ratio dichotomy for two cusps. Equal cusps: R_n has limsup infinity and liminf
zero. Unequal cusps: R_n tends to 0 or infinity.
Defaults: A = [0, f0(c)), B = (f1(c), 1]; override with delta_a, delta_b.
Thresholds: symmetric p0 = p1 = 1, n = 1e7: at least 80% of 500 trials with
running max >= 5 and running min <= 0.2. p0 = 1.5, p1 = 3: median R_n falls
by a factor >= 5 between n = 1e4 and n = 1e7.
Tables: ratio_summary.csv, traces.csv.
",
        Kind::Duality => "\
duality: occupation times against return-time sums
Result: the identity S_k(M) > n if and only if phi_{M,n} < k for orbits
started in M.
Defaults: initial point uniform on M = (c, 1).
Threshold: zero violations over 1e3 orbits of 1e5 steps at every pair of
checkpoints.
Tables: traces.csv.
",
        Kind::IterateSums => "\
iterate-sums: preimage sequences u_k, v_k of the two fixed points
Result: iterate-sum asymptotics. For p = 1, a V_n ~ log n; for p > 1,
U_n ~ (alpha/a)^alpha n^(1-alpha)/(1-alpha).
Thresholds: symmetric p = 1 map: |a1 V_n/log n - 1| <= 0.25 at n = 1e6;
p0 = 2: |U_n/(2 (alpha/a0)^alpha n^(1/2)) - 1| <= 0.10 at n = 1e6.
Tables: iterates.csv (rows k <= 1000, then 200 per decade).
",
        Kind::Oscillating => "\
oscillating: two slowly varying functions with an oscillating ratio
Result: the counterexample construction in which c(n)/n has liminf 0 and
limsup 1/2, so no normalization gives a distributional limit.
Thresholds: L_A(t_{2n+2}) >= n L_B(t_{2n+2}) and
L_A(t_{2n+1}) <= L_B(t_{2n+1})/n for the first 3 levels; min c(n)/n <= 0.05
and max c(n)/n >= 0.5 on the breakpoint grid.
Tables: breakpoints.csv, normalizer.csv (all in log scale).
",
        Kind::SumsMaxima => "\
sums-maxima: an iid pair against the sums of the other
Result: sums against maxima dichotomy. The ratio phi_n / (psi_0 + ... + psi_{n-1}) has
limsup infinity when the integral of a_psi(phi) diverges and limit 0 when it
converges. The classifier applies the closed-form rule to the power-log
tails; a lighter psi tail with the same divergent integral is divergent.
Thresholds: phi = psi with tail index 1/2: running max > 100 by n = 1e6 in
90% of 200 seeds. Tail n^-2 against n^-2 (log n)^-3: ratio <= 0.1 at
n = 1e7 in 90% of seeds.
Tables: trajectories.csv.
",
        Kind::Renewal => "\
renewal: the tower over a renewal chain
Result: renewal tower. With lifetimes f_k proportional to k^-5/2
(finite mean, infinite variance) the tower is null recurrent and
R_n = S_n(A)/S_n(B) tends to 1, while |S_n(A) - S_n(B)| <= X_{N_n}.
Thresholds: |R_n - 1| <= 0.05 at n = 1e7 in 90% of 200 seeds; the bound
holds at every step.
Tables: trajectories.csv.
",
        Kind::MassEscape => "\
mass-escape: mean fraction of time in (eps, 1 - eps)
Result: orbits spend asymptotically all their time near the indifferent
fixed points; for the symmetric p = 1 map the fraction decays like 1/log n.
Threshold: decreasing in n.
Tables: mass_escape.csv, traces.csv.
",
        Kind::CompareSums => "\
compare-sums: partial sums of iterates of two functions at a fixed point
Result: fixed-point comparison. If x - f(x) <= K (x - g(x)) the ratio of partial sums of
g over f stays bounded; for f = x - a x^p, g = x - b x^p it tends to
(a/b)^(1/(p-1)).
Thresholds: f = x - x^2, g = x - 2x^2, kappa = 1/4: ratio in [0.45, 0.55]
at m = 1e6. Cubic pair with b/a = 8: within 10% of 1/(2 sqrt 2).
Tables: partial_sums.csv.
",
    }
}

pub fn describe(kind: &str) -> LabResult<&'static str> {
    Ok(card(Kind::parse(kind)?))
}
