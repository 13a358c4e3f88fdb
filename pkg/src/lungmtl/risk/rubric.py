"""COPD risk rubric over demographics (age, gender, BMI).

The rubric is defined by 15 worked reference rows plus a summary band
table, and the two disagree (e.g. a 70-year-old female at BMI 28.47 is
rated 1 although the table's class-1 row reads underweight male). The
rule below is the minimal one consistent with every reference row: the
age band dominates, and underweight females escalate from 1 to 0 at
age 65+.
"""

from enum import Enum, IntEnum

import numpy as np

from ..corpus import DemographicRecord, Gender
from ..errors import OutOfRubricError


class RiskLevel(IntEnum):
    VERY_SEVERE = 0
    SEVERE = 1
    MODERATE = 2
    MILD = 3


class BmiCategory(Enum):
    UNDERWEIGHT = "underweight"  # < 18.5
    HEALTHY = "healthy"          # [18.5, 24.9]
    OVERWEIGHT = "overweight"    # (24.9, 29.9]
    OBESE = "obese"              # > 29.9


def bmi_category(bmi_kg_m2: float) -> BmiCategory:
    if bmi_kg_m2 < 18.5:
        return BmiCategory.UNDERWEIGHT
    if bmi_kg_m2 <= 24.9:
        return BmiCategory.HEALTHY
    if bmi_kg_m2 <= 29.9:
        return BmiCategory.OVERWEIGHT
    return BmiCategory.OBESE


def assign_risk(rec: DemographicRecord) -> RiskLevel:
    """Rate one record; the rubric starts at age 35."""
    if rec.age_years < 35:
        raise OutOfRubricError(
            f"age {rec.age_years} below 35; the rubric has no band for it")
    if rec.age_years >= 65:
        if (bmi_category(rec.bmi_kg_m2) is BmiCategory.UNDERWEIGHT
                and rec.gender == Gender.FEMALE):
            return RiskLevel.VERY_SEVERE
        return RiskLevel.SEVERE
    if rec.age_years >= 50:
        return RiskLevel.MODERATE
    return RiskLevel.MILD


def rule_labels(records) -> np.ndarray:
    return np.array([int(assign_risk(rec)) for rec in records], dtype=np.intp)


def to_features(records) -> np.ndarray:
    """(N, 3) matrix of (age, gender as 0/1, BMI)."""
    return np.array(
        [[rec.age_years, float(int(rec.gender)), rec.bmi_kg_m2]
         for rec in records], dtype=np.float64)


RISK_CLASS_NAMES = tuple(level.name for level in RiskLevel)
N_RISK_CLASSES = len(RiskLevel)
