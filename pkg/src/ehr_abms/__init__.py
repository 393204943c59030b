"""Attribute-based multi-signatures and multi-authority ABE for sharing health records.

The pieces, bottom up:

* :mod:`.pairing` - BLS signatures on BLS12-381 (signatures in G1).
* :mod:`.abms` - per-attribute signing keys from independent authorities and
  (t, n) threshold verification.
* :mod:`.policy`, :mod:`.lsss`, :mod:`.maabe` - monotone access policies, their
  linear secret sharing matrices, and the hybrid ABE container.
* :mod:`.ledger` - hash-chained, append-only registry of participants,
  profiles, ACLs and access events.
* :mod:`.edge_store` - content-addressed ciphertext storage with one-time URLs.
* :mod:`.workspace`, :mod:`.scenario`, :mod:`.bench`, :mod:`.cli` - orchestration.
"""

from .abms import (
    AttributeAuthority,
    AttributeDescriptor,
    AttributeRef,
    AttributeSignature,
    ThresholdResult,
    ThresholdSpec,
    abms_initial_setup,
    authority_setup,
    extract,
    sign_attribute,
    verify_attribute,
    verify_threshold,
)
from .edge_store import EdgeStore
from .errors import EhrAbmsError
from .ledger import AclRule, Ledger, Participant, PatientProfile, verify_chain
from .maabe import AbeAuthority, EhrCiphertext, abe_decrypt, abe_encrypt, abe_initial_setup
from .pairing import PairingParams, bls_sign, bls_verify, keygen, setup
from .policy import AccessPolicy, policy_parse, policy_satisfied
from .workspace import Workspace

__version__ = "0.1.0"

__all__ = [
    "AbeAuthority",
    "AccessPolicy",
    "AclRule",
    "AttributeAuthority",
    "AttributeDescriptor",
    "AttributeRef",
    "AttributeSignature",
    "EdgeStore",
    "EhrAbmsError",
    "EhrCiphertext",
    "Ledger",
    "PairingParams",
    "Participant",
    "PatientProfile",
    "ThresholdResult",
    "ThresholdSpec",
    "Workspace",
    "abe_decrypt",
    "abe_encrypt",
    "abe_initial_setup",
    "abms_initial_setup",
    "authority_setup",
    "bls_sign",
    "bls_verify",
    "extract",
    "keygen",
    "policy_parse",
    "policy_satisfied",
    "setup",
    "sign_attribute",
    "verify_attribute",
    "verify_chain",
    "verify_threshold",
]
