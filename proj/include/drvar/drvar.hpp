#ifndef DRVAR_DRVAR_HPP
#define DRVAR_DRVAR_HPP

#include "drvar/common.hpp"
#include "drvar/estimation.hpp"
#include "drvar/factor_space.hpp"
#include "drvar/montecarlo.hpp"
#include "drvar/serialization.hpp"
#include "drvar/structural.hpp"
#include "drvar/timeseries.hpp"

#endif // DRVAR_DRVAR_HPP
