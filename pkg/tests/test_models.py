import numpy as np
import pytest
from scipy.optimize import curve_fit

from machclock import (
    CutoffError,
    DickeBlock,
    DimensionError,
    OptomechParams,
    adjudicate_semiclassical_constant,
    bloch,
    build_dicke_block_model,
    build_full_optomech,
    build_number_measurement,
    build_optomech_adiabatic,
    build_two_level_thermal,
    classical_birth_death,
    dicke_rates,
    evolve,
    evolve_birth_death,
    fock_state,
    initial_block_weights,
    jz_initial_mean,
    lindblad_rhs,
    number_operator,
    product_state,
    required_cutoff,
    semiclassical_rhs,
    thermal_mode,
    thermal_number_moments,
    two_mode_operators,
    embed,
)


def grid(t_final, dt):
    n = int(round(t_final / dt))
    return np.linspace(0.0, n * dt, n + 1)


class TestTwoLevelBuilder:
    def test_pure_decay_at_zero_temperature(self):
        model = build_two_level_thermal(1.0, 0.0)
        rates = [r for r, _ in model.dissipators]
        assert rates == [1.0, 0.0]

    def test_steady_state_population(self):
        nbar = 1.5
        model = build_two_level_thermal(1.0, nbar)
        res = evolve(model, fock_state(0, 2), grid(30.0, 2e-3), store_every=15000)
        assert bloch(res.states[-1])[2] == pytest.approx(-1 / (2 * nbar + 1), abs=1e-9)

    def test_high_temperature_occupancy_is_half(self):
        nbar = 500.0
        model = build_two_level_thermal(0.001, nbar)
        res = evolve(model, fock_state(1, 2), grid(8.0, 1e-3), store_every=4000)
        assert res.states[-1].matrix[0, 0].real == pytest.approx(0.5, abs=1e-3)


class TestOptomechAdiabatic:
    def test_effective_rate_arithmetic(self):
        params = OptomechParams(g=1.0, gamma_m=100.0, nbar=20.0)
        assert params.photon_swap_rate == pytest.approx(0.04)

    def test_rate_ratio_is_boltzmann_factor(self):
        params = OptomechParams(g=1.0, gamma_m=40.0, nbar=1.0)
        model = build_optomech_adiabatic(params, cutoffs=(3, 3))
        (r_down, _), (r_up, _) = model.dissipators
        assert r_up / r_down == pytest.approx(0.5)  # nbar/(nbar+1) = exp(-ln 2)

    def test_number_difference_rate_identity(self):
        # d<n2 - n1>/dt = 2G<n1 n2> + 2G(nbar+1)<n1> - 2G nbar <n2>
        params = OptomechParams(g=1.0, gamma_m=50.0, nbar=1.25)
        big_g = params.photon_swap_rate
        model = build_optomech_adiabatic(params, cutoffs=(5, 5))
        ops = two_mode_operators(5, 5)
        # diagonal state supported away from the truncation boundary
        from machclock import DensityMatrix, HilbertSpace

        rho = product_state(
            DensityMatrix(HilbertSpace((5,)), np.diag([0.5, 0.3, 0.2, 0.0, 0.0])),
            DensityMatrix(HilbertSpace((5,)), np.diag([0.7, 0.2, 0.1, 0.0, 0.0])),
        )
        drho = lindblad_rhs(model, rho.matrix)
        lhs = np.real(np.trace((ops.n2 - ops.n1).matrix @ drho))
        n1 = np.real(np.trace(ops.n1.matrix @ rho.matrix))
        n2 = np.real(np.trace(ops.n2.matrix @ rho.matrix))
        n1n2 = np.real(np.trace((ops.n1 @ ops.n2).matrix @ rho.matrix))
        rhs = 2 * big_g * n1n2 + 2 * big_g * (params.nbar + 1) * n1 - 2 * big_g * params.nbar * n2
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_minus_sign_swaps_roles(self):
        params = OptomechParams(g=1.0, gamma_m=40.0, nbar=0.5)
        plus = build_optomech_adiabatic(params, "plus", (3, 3))
        minus = build_optomech_adiabatic(params, "minus", (3, 3))
        assert np.allclose(plus.dissipators[0][1].matrix, minus.dissipators[1][1].matrix)
        assert plus.dissipators[0][0] == minus.dissipators[0][0]

    def test_rejects_tiny_cutoffs(self):
        params = OptomechParams(g=1.0, gamma_m=40.0, nbar=0.5)
        with pytest.raises(CutoffError):
            build_optomech_adiabatic(params, cutoffs=(1, 3))


class TestFullOptomech:
    def test_decoupled_cavities_freeze_and_mechanics_thermalizes(self):
        nbar = 0.3
        params = OptomechParams(g=0.0, gamma_m=1.0, nbar=nbar)
        cm = required_cutoff(nbar) + 2
        model = build_full_optomech(params, (2, 2, cm))
        rho0 = product_state(fock_state(1, 2), fock_state(0, 2), fock_state(0, cm))
        n_m = embed(number_operator(cm), model.space, 2)
        n_1 = embed(number_operator(2), model.space, 0)
        res = evolve(
            model, rho0, grid(12.0, 2e-3), observables={"nm": n_m, "n1": n_1},
            store_states=False,
        )
        assert np.max(np.abs(res.observables["n1"] - 1.0)) < 1e-9
        assert res.observables["nm"][-1] == pytest.approx(nbar, abs=1e-3)

    def test_exchange_conserves_total_cavity_number(self):
        params = OptomechParams(g=1.0, gamma_m=40.0, nbar=0.4)
        cm = required_cutoff(0.4) + 1
        model = build_full_optomech(params, (3, 3, cm))
        n_total = embed(number_operator(3), model.space, 0) + embed(
            number_operator(3), model.space, 1
        )
        comm = model.hamiltonian @ n_total - n_total @ model.hamiltonian
        assert np.max(np.abs(comm.matrix)) < 1e-12

    def test_mechanical_cutoff_rule_enforced(self):
        params = OptomechParams(g=0.1, gamma_m=10.0, nbar=1.0)
        with pytest.raises(CutoffError):
            build_full_optomech(params, (3, 3, 10))

    def test_warns_outside_adiabatic_regime(self):
        with pytest.warns(UserWarning):
            OptomechParams(g=1.0, gamma_m=5.0, nbar=1.0)


class TestNumberMeasurement:
    def test_decoherence_rate_arithmetic(self):
        params = OptomechParams(
            g=1.0, gamma_m=40.0, nbar=0.5, kappa_probe=1.0, gamma_q=100.0
        )
        assert params.number_decoherence_rate == pytest.approx(0.04)

    def test_dephasing_reproduces_double_commutator(self):
        rng = np.random.default_rng(5)
        lam = 0.7
        n = number_operator(4).matrix
        m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        rho = m @ m.conj().T
        rho /= np.trace(rho)
        # rate 2*lam dissipator with jump op n
        nn = n @ n
        via_dissipator = 2 * lam * (n @ rho @ n - 0.5 * (nn @ rho + rho @ nn))
        double_comm = -lam * (n @ (n @ rho - rho @ n) - (n @ rho - rho @ n) @ n)
        assert np.max(np.abs(via_dissipator - double_comm)) < 1e-12

    def test_diagonal_states_feel_no_dephasing(self):
        params = OptomechParams(g=1.0, gamma_m=40.0, nbar=0.5)
        base = build_optomech_adiabatic(params, cutoffs=(3, 3))
        extended, channel = build_number_measurement(base, 0.8)
        assert channel is not None
        rho = product_state(thermal_mode(0.01, 3), thermal_mode(0.005, 3))
        rate, op = extended.dissipators[-1]
        assert rate == pytest.approx(1.6)
        term = rate * (
            op.matrix @ rho.matrix @ op.matrix
            - 0.5 * ((op @ op).matrix @ rho.matrix + rho.matrix @ (op @ op).matrix)
        )
        assert np.max(np.abs(term)) < 1e-14

    def test_measurement_neutrality_for_diagonal_observables(self):
        params = OptomechParams(g=1.0, gamma_m=40.0, nbar=0.5)
        base = build_optomech_adiabatic(params, cutoffs=(3, 3))
        extended, _ = build_number_measurement(base, 0.9)
        ops = two_mode_operators(3, 3)
        rho0 = product_state(fock_state(2, 3), fock_state(0, 3))
        times = grid(3.0, 5e-4)
        obs = {"n1": ops.n1, "n2": ops.n2}
        plain = evolve(base, rho0, times, observables=obs, store_states=False)
        monitored = evolve(extended, rho0, times, observables=obs, store_states=False)
        for name in obs:
            assert np.max(
                np.abs(plain.observables[name] - monitored.observables[name])
            ) < 1e-10


class TestDickeRates:
    def test_spin_half_reduces_to_two_level(self):
        down, up = dicke_rates(0.5, 0.5)
        assert (down, up) == (1.0, 0.0)
        down, up = dicke_rates(0.5, -0.5)
        assert (down, up) == (0.0, 1.0)

    def test_j1_m1_down_factor(self):
        assert dicke_rates(1, 1)[0] == pytest.approx(2.0)

    def test_ladder_bottom_has_no_down_rate(self):
        assert dicke_rates(3, -3)[0] == 0.0

    def test_rejects_invalid_level(self):
        with pytest.raises(DimensionError):
            dicke_rates(1, 0.5)


class TestBirthDeathChain:
    def test_columns_sum_to_zero(self):
        gen = classical_birth_death(DickeBlock(j=3, nbar=0.7, rate=0.1))
        assert np.max(np.abs(gen.sum(axis=0))) < 1e-14

    def test_detailed_balance_ratio(self):
        nbar = 0.8
        block = DickeBlock(j=4, nbar=nbar, rate=0.05)
        gen = classical_birth_death(block)
        # stationary distribution: null vector of the generator
        w, v = np.linalg.eig(gen)
        p = np.real(v[:, np.argmin(np.abs(w))])
        p = p / p.sum()
        ratios = p[1:] / p[:-1]
        assert np.max(np.abs(ratios - nbar / (nbar + 1))) < 1e-9

    def test_spin_half_chain_equals_two_level_master_equation(self):
        gamma, nbar = 1.0, 0.6
        block = DickeBlock(j=0.5, nbar=nbar, rate=gamma)
        gen = classical_birth_death(block)
        times = grid(2.0, 1e-3)
        # chain ordered by increasing m: index 0 = ground
        p0 = np.array([1.0, 0.0])
        chain = evolve_birth_death(gen, p0, times)
        model = build_two_level_thermal(gamma, nbar)
        res = evolve(model, fock_state(1, 2), times, store_every=400)
        for k, t in enumerate(res.state_times):
            idx = int(round(t / 1e-3))
            p_e_chain = chain[idx, 1]
            assert res.states[k].matrix[0, 0].real == pytest.approx(p_e_chain, abs=1e-9)

    @pytest.mark.parametrize("j,nbar", [(2.5, 0.8), (6, 0.0)])
    def test_matches_quantum_block_dynamics(self, j, nbar):
        rate = 0.05
        block = DickeBlock(j=j, nbar=nbar, rate=rate)
        dim = block.dim
        model = build_dicke_block_model(block)
        # start at the top of the ladder (m = +j)
        rho0 = fock_state(0, dim)  # quantum basis is ordered by decreasing m
        dt = 5e-4
        times = grid(4.0, dt)
        jz_diag_desc = np.array([j - b for b in range(dim)])
        jz_op = model.dissipators[0][1]  # J-
        from machclock import Operator

        jz = Operator(model.space, np.diag(jz_diag_desc).astype(complex))
        res = evolve(model, rho0, times, observables={"jz": jz}, store_states=False)
        p0 = np.zeros(dim)
        p0[-1] = 1.0  # chain ordered by increasing m
        chain = evolve_birth_death(classical_birth_death(block), p0, times)
        jz_chain = chain @ (np.arange(dim) - j)
        assert np.max(np.abs(res.observables["jz"] - jz_chain)) < 1e-8

    def test_superradiant_decay_is_not_exponential(self):
        block = DickeBlock(j=6, nbar=0.0, rate=0.05)
        gen = classical_birth_death(block)
        times = grid(6.0, 0.02)
        p0 = np.zeros(block.dim)
        p0[-1] = 1.0
        jz = evolve_birth_death(gen, p0, times) @ (np.arange(block.dim) - block.j)

        def model_exp(t, a, b, c):
            return a * np.exp(-b * t) + c

        popt, _ = curve_fit(model_exp, times, jz, p0=(12.0, 0.5, -6.0), maxfev=10000)
        residual = np.sqrt(np.mean((jz - model_exp(times, *popt)) ** 2))
        assert residual > 1e-2  # visibly nonexponential


class TestBlockWeights:
    def test_reconstructs_product_geometric(self):
        lam1, lam2 = 0.3, 0.1
        weights = initial_block_weights(lam1, lam2, 40)
        joint = weights.joint_distribution()
        n = np.arange(41)
        ref = np.outer(
            (1 - lam1) * lam1**n, (1 - lam2) * lam2**n
        )
        tri = np.add.outer(n, n) <= 40
        assert np.max(np.abs(joint[tri] - ref[tri])) < 1e-12

    def test_sector_weights_match_closed_form(self):
        lam1, lam2 = 0.45, 0.2
        weights = initial_block_weights(lam1, lam2, 50)
        big_n = np.arange(51)
        closed = (
            (1 - lam1)
            * (1 - lam2)
            * (lam1 ** (big_n + 1) - lam2 ** (big_n + 1))
            / (lam1 - lam2)
        )
        assert np.max(np.abs(weights.pn_total - closed)) < 1e-14

    def test_conditional_matches_closed_form(self):
        lam1, lam2 = 0.35, 0.5
        mu = lam1 / lam2
        weights = initial_block_weights(lam1, lam2, 45)
        for n_tot in (1, 4, 9):
            n = np.arange(n_tot + 1)
            closed = mu**n * (1 - mu) / (1 - mu ** (n_tot + 1))
            assert np.max(np.abs(weights.p_n_given_total[n_tot] - closed)) < 1e-13

    def test_equal_weights_give_uniform_conditionals(self):
        lam = 0.4
        weights = initial_block_weights(lam, lam, 40)
        for n_tot in (0, 3, 7):
            table = weights.p_n_given_total[n_tot]
            assert np.max(np.abs(table - 1.0 / (n_tot + 1))) < 1e-13
            # sector weight (N+1) lam^N (1-lam)^2
            assert weights.pn_total[n_tot] == pytest.approx(
                (n_tot + 1) * lam**n_tot * (1 - lam) ** 2, rel=1e-12
            )

    def test_vacuum_second_cavity_concentrates_top_level(self):
        weights = initial_block_weights(0.3, 0.0, 30)
        for n_tot in (1, 5):
            table = weights.p_n_given_total[n_tot]
            assert table[-1] == pytest.approx(1.0)
            assert np.max(np.abs(table[:-1])) == 0.0

    def test_total_mass_and_tail_rule(self):
        weights = initial_block_weights(0.3, 0.1, 40)
        assert weights.pn_total.sum() == pytest.approx(1.0, abs=1e-6)
        with pytest.raises(CutoffError):
            initial_block_weights(0.9, 0.85, 30)


class TestThermalMoments:
    def test_mean_difference(self):
        assert jz_initial_mean(3.0, 1.0) == pytest.approx(1.0)
        assert jz_initial_mean(2.0, 2.0) == 0.0

    def test_jz_operator_oracle(self):
        nbar1, nbar2 = 0.5, 0.2
        c1 = required_cutoff(nbar1, tail=1e-13)
        c2 = required_cutoff(nbar2, tail=1e-13)
        rho = product_state(thermal_mode(nbar1, c1), thermal_mode(nbar2, c2))
        ops = two_mode_operators(c1, c2)
        jz_val = np.real(np.trace(ops.jz.matrix @ rho.matrix))
        assert jz_val == pytest.approx(jz_initial_mean(nbar1, nbar2), abs=1e-10)

    def test_equal_means_identity(self):
        n_total = 6.0
        mean, second = thermal_number_moments(n_total / 2, n_total / 2)
        assert mean == n_total
        assert second == pytest.approx(1.5 * n_total**2 + n_total)

    def test_vacuum(self):
        assert thermal_number_moments(0.0, 0.0) == (0.0, 0.0)

    def test_second_moment_operator_oracle(self):
        nbar1, nbar2 = 0.45, 0.3
        c1 = required_cutoff(nbar1, tail=1e-14)
        c2 = required_cutoff(nbar2, tail=1e-14)
        rho = product_state(thermal_mode(nbar1, c1), thermal_mode(nbar2, c2))
        ops = two_mode_operators(c1, c2)
        n2_val = np.real(np.trace((ops.total @ ops.total).matrix @ rho.matrix))
        assert n2_val == pytest.approx(thermal_number_moments(nbar1, nbar2)[1], abs=1e-10)


class TestSemiclassical:
    def test_constant_term_at_zero(self):
        rate, n_total = 0.2, 8.0
        assert semiclassical_rhs(0.0, rate, 1.0, n_total, "paper") == pytest.approx(
            -1.5 * rate * (n_total + 1)
        )
        assert semiclassical_rhs(0.0, rate, 1.0, n_total, "derived") == pytest.approx(
            -0.75 * rate * (n_total + 2)
        )

    def test_variants_agree_in_hot_bath_limit(self):
        rate, nbar, n_total, z = 0.01, 1e4, 10.0, 0.5
        target = -2 * rate * nbar * z
        for variant in ("paper", "derived"):
            val = semiclassical_rhs(z, rate, nbar, n_total, variant)
            assert val == pytest.approx(target, rel=0.01)

    def test_ladder_rate_identity_against_solver(self):
        # d<Jz>/dt = -(G/4)<N(N+2)> + G<Jz^2> - G(2 nbar + 1)<Jz>
        params = OptomechParams(g=1.0, gamma_m=40.0, nbar=0.6)
        big_g = params.photon_swap_rate
        model = build_optomech_adiabatic(params, cutoffs=(6, 6))
        ops = two_mode_operators(6, 6)
        rho0 = product_state(fock_state(2, 6), fock_state(1, 6))
        res = evolve(model, rho0, grid(2.0, 2e-3), store_every=200)
        for state in res.states:
            m = state.matrix
            drho = lindblad_rhs(model, m)
            lhs = np.real(np.trace(ops.jz.matrix @ drho))
            n_tot = ops.total.matrix
            nn2 = np.real(np.trace((n_tot @ (n_tot + np.eye(36) * 2)) @ m))
            jz2 = np.real(np.trace((ops.jz @ ops.jz).matrix @ m))
            jz1 = np.real(np.trace(ops.jz.matrix @ m))
            rhs = -(big_g / 4) * nn2 + big_g * jz2 - big_g * (2 * 0.6 + 1) * jz1
            assert lhs == pytest.approx(rhs, abs=1e-8)

    def test_adjudication_prefers_thermal_moment_closure(self):
        report = adjudicate_semiclassical_constant(0.01, 6.0, 4.0)
        assert report["winner"] == "derived"
        # the exact value from the operator moments
        mean, second = thermal_number_moments(6.0, 4.0)
        exact = -(0.01 / 4) * (second + 2 * mean) / (mean / 2)
        assert report["exact"] == pytest.approx(exact)
        assert report["abs_error_derived"] < report["abs_error_paper"]


class TestCasimirConservation:
    def test_collective_invariant_constant_under_transfer(self):
        params = OptomechParams(g=1.0, gamma_m=40.0, nbar=1.0)
        model = build_optomech_adiabatic(params, cutoffs=(4, 4))
        ops = two_mode_operators(4, 4)
        rho0 = product_state(fock_state(2, 4), fock_state(1, 4))
        res = evolve(
            model, rho0, grid(4.0, 1e-3), observables={"j2": ops.j_squared},
            store_states=False,
        )
        drift = np.max(np.abs(res.observables["j2"] - res.observables["j2"][0]))
        assert drift < 1e-9
