#pragma once

#include "coupling/data_io.hpp"
#include "coupling/distributions.hpp"
#include "coupling/embedding.hpp"
#include "coupling/error.hpp"
#include "coupling/eval.hpp"
#include "coupling/frobenius_solver.hpp"
#include "coupling/nuclear_solver.hpp"
#include "coupling/prob_core.hpp"
#include "coupling/random.hpp"
#include "coupling/simplex.hpp"
#include "coupling/svd.hpp"
#include "coupling/transport.hpp"
#include "coupling/version.hpp"
