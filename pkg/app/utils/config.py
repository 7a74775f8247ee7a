import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

load_dotenv()

BUNDLED_SCENARIO_PATH: Path = Path(__file__).resolve().parent.parent / "data" / "ieee33_bla.json"

SOLVER_BACKEND: str = os.getenv("SOLVER_BACKEND", "highs")
SOLVER_GAP: float = float(os.getenv("SOLVER_GAP", "1e-6"))
SOLVER_TIME_LIMIT: float = float(os.getenv("SOLVER_TIME_LIMIT", "60"))
SOLVER_THREADS: int = int(os.getenv("SOLVER_THREADS", "1"))
SOLVER_FEASIBILITY_TOL: float = float(os.getenv("SOLVER_FEASIBILITY_TOL", "1e-9"))

KEY_MEAN: float = float(os.getenv("KEY_MEAN", "0.1"))
KEY_VARIANCE: float = float(os.getenv("KEY_VARIANCE", "0.1"))
KEY_COND_MAX: float = float(os.getenv("KEY_COND_MAX", "1e6"))
KEY_MAX_RESAMPLES: int = int(os.getenv("KEY_MAX_RESAMPLES", "16"))
KEY_E_FLOOR: float = float(os.getenv("KEY_E_FLOOR", "1e-3"))
CET_DUPLICATION: int = int(os.getenv("CET_DUPLICATION", "2"))

LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO").upper()
TRANSCRIPT_DEBUG: bool = bool(int(os.getenv("TRANSCRIPT_DEBUG", "0")))

SCENARIO_PATH: Path = Path(os.getenv("SCENARIO_PATH", str(BUNDLED_SCENARIO_PATH)))
DSO_HOST: str = os.getenv("DSO_HOST", "0.0.0.0")
DSO_PORT: int = int(os.getenv("DSO_PORT", "8500"))


def _optional_float(name: str) -> Optional[float]:
    value = os.getenv(name)
    return float(value) if value else None


# set only when the environment names them; they override scenario-file values in the CLI
SOLVER_GAP_OVERRIDE: Optional[float] = _optional_float("SOLVER_GAP")
SOLVER_TIME_LIMIT_OVERRIDE: Optional[float] = _optional_float("SOLVER_TIME_LIMIT")
