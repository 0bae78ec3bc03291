"""Smart-contract deployment costs measured on a local Ethereum test chain.

Shipped as reference data only; nothing here is executed.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class ReferenceCost:
    protocol: str
    operation: str
    ether: float
    gas: int
    usd: float


REFERENCE_COSTS = (
    ReferenceCost("GT", "Deploy SC", 1.2e-4, 1132443, 0.2862),
    ReferenceCost("BoD", "Deploy SC", 1.3e-4, 1268369, 0.2879),
    ReferenceCost("SoD", "Deploy SC", 1.5e-4, 1582349, 0.3783),
)
GWEI_PER_ETHER = 1e9
