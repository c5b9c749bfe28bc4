#pragma once

// Generalized kernel two-sample tests: GPK, fGPK, fGPK_M and their Simes variants.

#include "kergpk/aggregates.hpp"
#include "kergpk/error.hpp"
#include "kergpk/inference.hpp"
#include "kergpk/kernel.hpp"
#include "kergpk/matrix.hpp"
#include "kergpk/parallel.hpp"
#include "kergpk/simgen.hpp"
#include "kergpk/statistics.hpp"
#include "kergpk/sums.hpp"
