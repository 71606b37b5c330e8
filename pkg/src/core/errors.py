# Exceptions du projet helitube


class HelitubeError(Exception):
    """Base de toutes les erreurs levées par helitube."""


class EmbeddingViolation(HelitubeError, ValueError):
    """ε = ρ₀κ ≥ 1 : le tube se recoupe, h n'est plus strictement positif."""


class DegenerateCurve(HelitubeError, ValueError):
    """κ = τ = 0 : pas de repère de Frenet."""


class DegeneratePeriod(HelitubeError, ValueError):
    """τ = 0 sans période en s fournie par l'utilisateur."""


class GaugeMismatch(HelitubeError, TypeError):
    """Champ passé dans la mauvaise jauge (PSI au lieu de PHI ou l'inverse)."""


class NearResonance(HelitubeError, ArithmeticError):
    """Dénominateur du premier ordre trop petit, il faut le traitement à deux bandes."""

    def __init__(self, message, denominator=None):
        super().__init__(message)
        self.denominator = denominator


class OutOfValidity(HelitubeError, ValueError):
    """Développement près du bord de zone hors de son domaine de validité."""


class SingularMass(HelitubeError, ArithmeticError):
    """Hessienne de la bande numériquement singulière."""


class ConvergenceFailure(HelitubeError, RuntimeError):
    """Le solveur propre n'a pas atteint la cible de résidu."""

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


class DimensionLimitExceeded(HelitubeError, ValueError):
    """Matrice dense au-delà de la limite configurée."""


class ConfigError(HelitubeError, ValueError):
    """Fichier de configuration ou option invalide."""
