#pragma once

#include "claimmatch/baseline.hpp"
#include "claimmatch/corpus.hpp"
#include "claimmatch/error.hpp"
#include "claimmatch/metrics.hpp"
#include "claimmatch/parsing.hpp"
#include "claimmatch/provider.hpp"
#include "claimmatch/runner.hpp"
#include "claimmatch/templates.hpp"
#include "claimmatch/types.hpp"
