"""Column layout shared by the cohort files, the preprocessing pipeline and the model."""

N_IMAGING = 90
N_COGNITION = 13
N_CLINICAL = 18
N_COMPOSITES = 4

IMAGING_COLUMNS = [f"roi_{j:02d}" for j in range(N_IMAGING)]
COGNITION_COLUMNS = [
    "gds",
    "faq",
    "npi",
    "ravlt_immediate",
    "ravlt_learning",
    "ecog_pt",
    "moca",
    "bnt",
    "logical_memory",
    "digit_symbol",
    "trail_making_b",
    "category_fluency",
    "cci",
]
COMPOSITE_DOMAINS = ("memory", "executive", "language", "visuospatial")
COMPOSITE_COLUMNS = [f"comp_{d}" for d in COMPOSITE_DOMAINS]

VITAL_COLUMNS = ["height", "weight", "sbp", "dbp", "pulse", "temperature"]
COMORBIDITY_COLUMNS = [
    "hx_cardiovascular",
    "hx_respiratory",
    "hx_hepatic",
    "hx_endocrine",
    "hx_gastrointestinal",
    "hx_renal",
    "hx_allergies",
    "hx_drug_abuse",
    "hx_alcohol_abuse",
    "hx_smoking",
]
CLINICAL_COLUMNS = ["age", "sex"] + VITAL_COLUMNS + COMORBIDITY_COLUMNS
CONTINUOUS_CLINICAL = ["age"] + VITAL_COLUMNS

DIAGNOSES = ("CN", "MCI", "AD")
DIAGNOSIS_ALIASES = {"CN": "CN", "MCI": "MCI", "EMCI": "MCI", "LMCI": "MCI", "AD": "AD"}
GROUPS = ("pMCI", "sMCI", "excluded")

MONTH_STEP = 6
MAX_MONTH = 60

MODALITIES = ("imaging", "cognition", "clinical")

assert len(COGNITION_COLUMNS) == N_COGNITION
assert len(CLINICAL_COLUMNS) == N_CLINICAL
