#pragma once

#include "uerw/errors.hpp"
#include "uerw/special_fn.hpp"
#include "uerw/rng.hpp"
#include "uerw/kernel.hpp"
#include "uerw/index_set.hpp"
#include "uerw/walker.hpp"
#include "uerw/moments.hpp"
#include "uerw/genealogy.hpp"
#include "uerw/analysis.hpp"
