#pragma once

#define ALTKIN_VERSION "0.1.0"
