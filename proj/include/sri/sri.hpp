#ifndef SRI_SRI_HPP
#define SRI_SRI_HPP

#include "sri/rng.hpp"
#include "sri/convex_set.hpp"
#include "sri/set_valued_map.hpp"
#include "sri/markov.hpp"
#include "sri/mean_field.hpp"
#include "sri/di.hpp"
#include "sri/two_timescale.hpp"
#include "sri/saddle.hpp"
#include "sri/io.hpp"

#endif  // SRI_SRI_HPP
