from enum import Enum
from pydantic import BaseModel
from typing import Any, Dict, Optional


class ErrorCode(str, Enum):
    INVALID_INPUT = "INVALID_INPUT"
    DOMAIN_ERROR = "DOMAIN_ERROR"
    DEGENERATE_SPECTRUM = "DEGENERATE_SPECTRUM"
    DEGENERATE_EXTREMUM = "DEGENERATE_EXTREMUM"
    REJECTED_TARGET = "REJECTED_TARGET"
    ILL_CONDITIONED = "ILL_CONDITIONED"
    PHASE_INVALID = "PHASE_INVALID"
    GRID_MISMATCH = "GRID_MISMATCH"
    STORE_FAILED = "STORE_FAILED"
    INTERNAL_ERROR = "INTERNAL_ERROR"


class ErrorBody(BaseModel):
    code: ErrorCode
    message: str
    detail: Optional[Dict[str, Any]] = None


class ChirpletError(Exception):
    """Base class of every domain failure; carries an ErrorCode and optional detail."""

    code: ErrorCode = ErrorCode.INTERNAL_ERROR

    def __init__(self, message: str, detail: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.detail = detail or {}

    def to_body(self) -> ErrorBody:
        return ErrorBody(code=self.code, message=str(self), detail=self.detail or None)


# CLI exit codes per error class; 0 is reserved for success, partial fits included
EXIT_CODES: Dict[ErrorCode, int] = {
    ErrorCode.INVALID_INPUT: 2,
    ErrorCode.DOMAIN_ERROR: 2,
    ErrorCode.DEGENERATE_SPECTRUM: 2,
    ErrorCode.DEGENERATE_EXTREMUM: 2,
    ErrorCode.REJECTED_TARGET: 2,
    ErrorCode.PHASE_INVALID: 2,
    ErrorCode.GRID_MISMATCH: 2,
    ErrorCode.ILL_CONDITIONED: 3,
    ErrorCode.STORE_FAILED: 4,
    ErrorCode.INTERNAL_ERROR: 1,
}


def exit_code_for(code: ErrorCode) -> int:
    return EXIT_CODES.get(code, 1)
