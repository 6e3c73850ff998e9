"""Privacy-preserving exposure lookup: a client holding a contact ledger
learns how many of its contacts appear in a health authority's diagnosed
set, and nothing else; an authorized variant additionally requires each
contact to carry a certification-authority signature.
"""

from .agent import QuerySchedule, Tier, TierPolicy, Warning, run_query, send_feedback
from .apsi import ApsiDigest, ApsiRequest, ApsiResponse, ca_sign, verify_signature
from .arith import ModexpCounter
from .authority import AuthorityService, DiagnosisDb
from .errors import PsiTraceError
from .fdh import uid_to_element
from .groups import GroupParams, generate_group_params, load_params
from .ledger import ContactLedger, ContactRecord, ProximityPolicy, load_ledger
from .psica import PsiCaRequest, PsiCaResponse
from .rsakeys import ApsiCommon, RsaAuthorityKey, generate_rsa_authority_key, load_common, load_key
from .simbench import BenchResult, ScenarioConfig, generate_scenario, oracle_intersection, run_bench, run_sim

__version__ = "0.1.0"

__all__ = [
    "ApsiCommon",
    "ApsiDigest",
    "ApsiRequest",
    "ApsiResponse",
    "AuthorityService",
    "BenchResult",
    "ContactLedger",
    "ContactRecord",
    "DiagnosisDb",
    "GroupParams",
    "ModexpCounter",
    "ProximityPolicy",
    "PsiCaRequest",
    "PsiCaResponse",
    "PsiTraceError",
    "QuerySchedule",
    "RsaAuthorityKey",
    "ScenarioConfig",
    "Tier",
    "TierPolicy",
    "Warning",
    "ca_sign",
    "generate_group_params",
    "generate_rsa_authority_key",
    "generate_scenario",
    "load_common",
    "load_key",
    "load_ledger",
    "load_params",
    "oracle_intersection",
    "run_bench",
    "run_query",
    "run_sim",
    "send_feedback",
    "uid_to_element",
    "verify_signature",
]
