#pragma once

#include "tgl/error.hpp"
#include "tgl/types.hpp"
#include "tgl/sparse_tensor.hpp"
#include "tgl/synthetic.hpp"
#include "tgl/cp_model.hpp"
#include "tgl/relation_graph.hpp"
#include "tgl/gcn.hpp"
#include "tgl/optimizer.hpp"
#include "tgl/metrics.hpp"
#include "tgl/trainer.hpp"
#include "tgl/report.hpp"
