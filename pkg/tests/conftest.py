import os

# The matrices here are small (tens of rows); BLAS threading costs more in
# sync overhead than it buys, and the training-heavy acceptance tests run
# measurably faster single-threaded. Must be set before numpy initializes.
for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")
