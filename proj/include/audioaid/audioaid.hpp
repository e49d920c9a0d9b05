#pragma once

#include "audioaid/arbiter.hpp"
#include "audioaid/detection.hpp"
#include "audioaid/detector.hpp"
#include "audioaid/error.hpp"
#include "audioaid/font.hpp"
#include "audioaid/frame.hpp"
#include "audioaid/imaging.hpp"
#include "audioaid/labels.hpp"
#include "audioaid/log.hpp"
#include "audioaid/metrics.hpp"
#include "audioaid/ocr.hpp"
#include "audioaid/pipeline.hpp"
#include "audioaid/pnm.hpp"
#include "audioaid/process.hpp"
#include "audioaid/raster.hpp"
#include "audioaid/speech.hpp"
