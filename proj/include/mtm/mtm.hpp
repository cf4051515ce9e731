#pragma once

#include "mtm/dataset.hpp"
#include "mtm/error.hpp"
#include "mtm/fairness.hpp"
#include "mtm/flip.hpp"
#include "mtm/index_model.hpp"
#include "mtm/linear_fit.hpp"
#include "mtm/metrics.hpp"
#include "mtm/oracle.hpp"
#include "mtm/parallel.hpp"
#include "mtm/qp.hpp"
#include "mtm/ranking.hpp"
#include "mtm/rashomon_single.hpp"
#include "mtm/report.hpp"
#include "mtm/solver.hpp"
#include "mtm/synth.hpp"
