#pragma once

// Umbrella header.

#include "blockkrylov/dense/matrix.hpp"
#include "blockkrylov/dense/rng.hpp"
#include "blockkrylov/dense/lu.hpp"
#include "blockkrylov/dense/norms.hpp"
#include "blockkrylov/dense/matrix_market.hpp"
#include "blockkrylov/block_system.hpp"
#include "blockkrylov/krylov.hpp"
#include "blockkrylov/precond.hpp"
#include "blockkrylov/theory.hpp"
#include "blockkrylov/problems.hpp"
#include "blockkrylov/experiments.hpp"
#include "blockkrylov/verify.hpp"
#include "blockkrylov/serialize.hpp"
