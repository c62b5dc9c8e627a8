"""Tabular regression data augmentation with teacher-labelled noisy rows."""

from .augment import (
    AugmentationConfig,
    SyntheticSet,
    augment,
    combine,
    generate_cmixup,
    generate_mixup,
    generate_naive_noise,
    generate_teacher_noise,
)
from .datagen import GeneratorSpec, generate
from .dataset import (
    ColumnStats,
    Dataset,
    SplitSpec,
    Standardizer,
    apply_standardizer,
    compute_column_stats,
    fit_standardizer,
    load_csv,
    split,
    subsample,
)
from .student import StudentSpec, TrainedStudent, fit_student, rmse, student_predict
from .teacher import TeacherSpec, TrainedTeacher, fit_teacher, teacher_predict

__version__ = "0.1.0"
