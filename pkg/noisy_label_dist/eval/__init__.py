from noisy_label_dist.eval.metrics import accuracy
from noisy_label_dist.eval.cv import CvOutcome, CvSpec, crossValidate
from noisy_label_dist.eval.experiment import ExperimentGrids, ExperimentReport, RunRecord, compareMethods
from noisy_label_dist.eval.verify import VerificationItem, VerificationReport, verificationSuite
