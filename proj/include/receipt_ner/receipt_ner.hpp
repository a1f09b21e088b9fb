#pragma once

#include "receipt_ner/unicode.hpp"
#include "receipt_ner/category.hpp"
#include "receipt_ner/corpus.hpp"
#include "receipt_ner/ocr_noise.hpp"
#include "receipt_ner/prompting.hpp"
#include "receipt_ner/predictions.hpp"
#include "receipt_ner/bio_codec.hpp"
#include "receipt_ner/backend.hpp"
#include "receipt_ner/scoring.hpp"
#include "receipt_ner/report.hpp"
#include "receipt_ner/config.hpp"
