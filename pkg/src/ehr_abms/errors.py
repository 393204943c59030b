"""Exception hierarchy shared by every module of the toolkit."""


class EhrAbmsError(Exception):
    """Base class for all errors raised by this package."""


class UnsupportedSecurityLevel(EhrAbmsError, ValueError):
    pass


class EntropyError(EhrAbmsError):
    pass


class MalformedEncodingError(EhrAbmsError, ValueError):
    """A byte or hex encoding does not decode to a valid object."""


class InvalidScalarError(EhrAbmsError, ValueError):
    pass


class EmptyMessageError(EhrAbmsError, ValueError):
    pass


class DuplicateRegistrationError(EhrAbmsError):
    pass


class UnknownGidError(EhrAbmsError, LookupError):
    pass


class ForeignAttributeError(EhrAbmsError):
    """The authority does not own the requested attribute."""


class AttestationMismatchError(EhrAbmsError):
    """A value differs from the one the authority attested."""


class ThresholdSpecError(EhrAbmsError, ValueError):
    pass


class PolicySyntaxError(EhrAbmsError, ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class MissingPublicKeyError(EhrAbmsError, LookupError):
    pass


class MixedGidError(EhrAbmsError, ValueError):
    pass


class MalformedCiphertextError(EhrAbmsError, ValueError):
    pass


class DecryptionError(EhrAbmsError):
    pass


class PolicyNotSatisfiedError(DecryptionError):
    """Uniform failure: the supplied keys do not open the ciphertext."""

    def __init__(self):
        super().__init__("decryption failed: access policy not satisfied")


class CiphertextIntegrityError(DecryptionError):
    """The payload failed authentication although the policy was satisfied."""


class UnknownParticipantError(EhrAbmsError, LookupError):
    pass


class AccessDeniedError(EhrAbmsError, PermissionError):
    pass


class InvalidSignatureError(EhrAbmsError):
    pass


class NoEhrObjectError(EhrAbmsError, LookupError):
    pass


class UnknownObjectError(EhrAbmsError, LookupError):
    pass


class WorkspaceError(EhrAbmsError):
    pass
