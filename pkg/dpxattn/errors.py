# License: GNU Affero General Public License v3 or later
# A copy of GNU AGPL v3 should have been included in this software package in LICENSE.txt.

"""dpxattn errors"""


class DPXAttnError(ValueError):
    """Base class for all dpxattn errors"""


class InvalidParameter(DPXAttnError):
    """Error raised when a parameter or an input lies outside its domain"""


class DatasetError(InvalidParameter):
    """Error raised when a dataset file is malformed or inconsistent"""


class TreeMismatch(InvalidParameter):
    """Error raised when boosted tree copies were not built over the same array"""


class InfeasibleParameters(DPXAttnError):
    """Error raised when valid parameters can't be realised at this scale"""


class BudgetUnderflow(InfeasibleParameters):
    """Error raised when a privacy budget split falls below the configured floor"""


class DegenerateOutput(DPXAttnError):
    """Error raised when a private normalizer leaves no usable output"""


class PrivacyViolation(DPXAttnError):
    """Error raised when noise is drawn while the noise source is frozen"""
