#pragma once

#include "qdrs/bench.hpp"
#include "qdrs/classifier.hpp"
#include "qdrs/errors.hpp"
#include "qdrs/generators.hpp"
#include "qdrs/geometry.hpp"
#include "qdrs/io.hpp"
#include "qdrs/partition_query.hpp"
#include "qdrs/query_sample.hpp"
#include "qdrs/ringtree.hpp"
#include "qdrs/serialize.hpp"
#include "qdrs/stab_metrics.hpp"
#include "qdrs/tree_select.hpp"
