"""Full scenario grid: 3 algorithms x 5 UE counts x 15 seeds x 150 episodes.
This is an overnight job on one core; pass an output directory to resume into
a different location. Use scripts/run_quick.py or `mlbsim run --quick` for a
fast smoke sweep."""
import sys

from mlbsim.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "results_full"
    main(["run", "--out", out])
    main(["summarize", out])
