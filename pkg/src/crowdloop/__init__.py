"""crowdloop: ensemble annotation with consistency-guided human review.

The pipeline fans each record of a social-media corpus out to N independent
annotator backends, aggregates their outputs by majority vote with a
consistency score, routes low-consistency records to a human review queue,
applies deterministic correction rules, and evaluates the resulting dataset
with a self-contained statistics toolkit (chi-square + Cramer's V, two-sample
KS, negative-binomial regression, VIF, Cohen's kappa).
"""

__version__ = "0.1.0"
