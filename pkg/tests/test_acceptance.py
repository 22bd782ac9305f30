"""All acceptance criteria at their stated tolerances, one result line each."""
import pytest

from dicke_usc.validation import CRITERIA, run_criterion


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA), ids=lambda n: f"criterion{n:02d}")
def test_criterion(number, acceptance_lines):
    result = run_criterion(number)
    line = result.line()
    acceptance_lines.append(line)
    print(line)
    assert result.passed, line
