from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import sympy


def _show(value) -> str:
    return str(sympy.nsimplify(value)) if isinstance(value, sympy.Float) else str(value)


@dataclass(frozen=True)
class BoundReport:
    """
    One evaluated dimension bound. `formula` is a stable identifier such as
    'fixed-xi/q' or 'fixed-theta/hausdorff'; `raw` is the unclamped value.
    """
    formula: str
    value: sympy.Expr
    raw: sympy.Expr
    ambient: int
    inputs: Dict[str, Any] = field(default_factory=dict)
    pivot: Optional[int] = None
    clamped: bool = False
    checks: Dict[str, bool] = field(default_factory=dict)

    @property
    def value_float(self) -> float:
        return float(sympy.N(self.value, 30))

    @property
    def within_ambient(self) -> bool:
        return bool(sympy.N(self.value - self.ambient, 60) <= 0)

    def __repr__(self):
        return f'<BoundReport {self.formula} = {self.value}>'

    def to_dict(self) -> Dict:
        return {
            'formula': self.formula,
            'value': _show(self.value),
            'value_float': self.value_float,
            'value_digits': str(sympy.N(self.value, 64)),
            'raw': _show(self.raw),
            'ambient': self.ambient,
            'pivot': self.pivot,
            'clamped': self.clamped,
            'inputs': {key: str(value) for key, value in self.inputs.items()},
            'checks': dict(self.checks),
        }
