#pragma once

#include "pexsim/compare.hpp"
#include "pexsim/core.hpp"
#include "pexsim/csv.hpp"
#include "pexsim/design.hpp"
#include "pexsim/errors.hpp"
#include "pexsim/format.hpp"
#include "pexsim/gee.hpp"
#include "pexsim/linalg.hpp"
#include "pexsim/lmm.hpp"
#include "pexsim/replicate.hpp"
#include "pexsim/report.hpp"
#include "pexsim/simulate.hpp"
#include "pexsim/stats.hpp"
#include "pexsim/svg.hpp"
