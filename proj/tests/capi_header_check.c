/* SPDX-License-Identifier: Apache-2.0 */
/* Copyright 2026 The asr-triage Authors */

/* Compiles the public header as C and exercises a call that needs no files. */
#include "asr/asr_triage.h"

#include <stdio.h>
#include <string.h>

int main(void) {
    asr_scorer* s = NULL;
    asr_status st = asr_scorer_open("/nonexistent/weights.asrw", &s);
    if (st != ASR_E_IO || s != NULL || strlen(asr_last_error()) == 0) {
        fprintf(stderr, "unexpected status %s: %s\n", asr_status_name(st), asr_last_error());
        return 1;
    }
    if (asr_scorer_open(NULL, &s) != ASR_E_INVALID_ARGUMENT) return 1;
    asr_scorer_close(NULL);
    printf("asr-triage %s C header ok\n", asr_version());
    return 0;
}
