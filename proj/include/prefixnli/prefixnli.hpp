#pragma once

#include "prefixnli/core_types.hpp"
#include "prefixnli/corpus_io.hpp"
#include "prefixnli/cost_model.hpp"
#include "prefixnli/decoding_engine.hpp"
#include "prefixnli/error.hpp"
#include "prefixnli/eval_metrics.hpp"
#include "prefixnli/fixture.hpp"
#include "prefixnli/http_backends.hpp"
#include "prefixnli/inference_gateway.hpp"
#include "prefixnli/mock_backends.hpp"
#include "prefixnli/prefix_dataset.hpp"
#include "prefixnli/protocol_server.hpp"
#include "prefixnli/reports.hpp"
#include "prefixnli/rng.hpp"
#include "prefixnli/text.hpp"
