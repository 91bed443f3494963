#ifndef DOCAUSAL_DOCAUSAL_HPP
#define DOCAUSAL_DOCAUSAL_HPP

#include "docausal/error.hpp"
#include "docausal/stats.hpp"
#include "docausal/table.hpp"
#include "docausal/dag.hpp"
#include "docausal/regress.hpp"
#include "docausal/dataset.hpp"
#include "docausal/gboost.hpp"
#include "docausal/effects.hpp"
#include "docausal/refute.hpp"
#include "docausal/cate.hpp"
#include "docausal/sensitivity.hpp"
#include "docausal/synth.hpp"
#include "docausal/config.hpp"
#include "docausal/pipeline.hpp"

#endif  // DOCAUSAL_DOCAUSAL_HPP
