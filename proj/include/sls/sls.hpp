#pragma once

#include "sls/errors.hpp"
#include "sls/plant.hpp"
#include "sls/fir.hpp"
#include "sls/eq_ls.hpp"
#include "sls/column_problem.hpp"
#include "sls/response.hpp"
#include "sls/slc.hpp"
#include "sls/synth.hpp"
#include "sls/controller.hpp"
#include "sls/io.hpp"
#include "sls/sweep.hpp"
