"""Quick sweep: 3 seeds, 40 episodes, 30 UEs, all three algorithms.
Equivalent to `mlbsim run --quick --out results_quick` followed by
`mlbsim summarize results_quick`."""
import sys

from mlbsim.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "results_quick"
    main(["run", "--quick", "--out", out])
    main(["summarize", out])
