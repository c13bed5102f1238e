#pragma once

#include "qhmm/calibrate.hpp"
#include "qhmm/data.hpp"
#include "qhmm/dependence/bivariate.hpp"
#include "qhmm/dependence/coupling.hpp"
#include "qhmm/dependence/elliptical.hpp"
#include "qhmm/dependence/rank.hpp"
#include "qhmm/dependence/sim.hpp"
#include "qhmm/dependence/vine.hpp"
#include "qhmm/error.hpp"
#include "qhmm/hmm.hpp"
#include "qhmm/simulate.hpp"
#include "qhmm/validate.hpp"
