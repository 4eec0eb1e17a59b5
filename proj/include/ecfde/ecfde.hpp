#pragma once

#include "bench.hpp"
#include "error.hpp"
#include "estimator.hpp"
#include "fourier.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"
#include "rng.hpp"
#include "samples.hpp"
#include "simulate.hpp"
#include "special.hpp"
#include "targets.hpp"
#include "threshold.hpp"
#include "version.hpp"
