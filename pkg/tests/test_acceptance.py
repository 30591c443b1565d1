"""Acceptance gate: one test per criterion, each printing its pass/fail line.

Every test calls the corresponding named check from the acceptance module,
prints the one-line PASS/FAIL summary with the measured numbers, and then
asserts both the verdict and the criterion's runtime budget where one is
stated.  Criteria 8 and 9 share a single training run (cached inside the
acceptance module), so the budget is asserted on the first of the two.
"""

from kplanenet import acceptance


def _gate(check, budget=None):
    result = check()
    print(result.line())
    assert result.passed, result.line()
    if budget is not None:
        assert result.runtime <= budget, (
            f"{result.name}: runtime {result.runtime:.1f}s exceeds the "
            f"{budget:.0f}s budget")
    return result


def test_criterion_01_constants():
    _gate(acceptance.check_constants, budget=1.0)


def test_criterion_02_greens_weak_identity():
    _gate(acceptance.check_greens_weak_identity, budget=30.0)


def test_criterion_03_fourier_slice():
    _gate(acceptance.check_fourier_slice, budget=60.0)


def test_criterion_04_fbp_identity():
    _gate(acceptance.check_fbp_identity, budget=60.0)


def test_criterion_05_biorthogonality():
    _gate(acceptance.check_biorthogonality, budget=30.0)


def test_criterion_06_representer_sparsity():
    _gate(acceptance.check_representer_sparsity, budget=10.0)


def test_criterion_07_k0_reduction():
    _gate(acceptance.check_k0_reduction, budget=5.0)


def test_criterion_08_univariate_optimum():
    _gate(acceptance.check_univariate_optimum, budget=60.0)


def test_criterion_09_trainer_invariants():
    _gate(acceptance.check_trainer_invariants)


def test_criterion_10_isotropy():
    _gate(acceptance.check_isotropy)


def test_report_covers_every_check():
    names = {fn.__name__.removeprefix("check_") for fn in acceptance.ALL_CHECKS}
    assert len(names) == 10
