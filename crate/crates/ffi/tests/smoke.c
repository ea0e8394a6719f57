#include <stdio.h>
#include <stdlib.h>
#include "thzmap.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        ThzStatus s_ = (call);                                             \
        if (s_ != THZ_STATUS_OK) {                                         \
            fprintf(stderr, "%s: %s (%s)\n", #call, thz_status_message(s_), \
                    thz_last_error());                                     \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    ThzScene *scene = NULL;
    CHECK(thz_scene_generate(100.0, 100.0, 32, 32, 3, 8.0, 25.0, 7, &scene));

    ThzBeams beams = thz_beams_default();
    ThzRadio radio = thz_radio_default();
    ThzTensor *raw = NULL;
    CHECK(thz_trace_all(scene, &beams, &radio, &raw));

    size_t rows, cols, dirs;
    CHECK(thz_tensor_dims(raw, &rows, &cols, &dirs));
    if (rows != 32 || cols != 32 || dirs != 18) return 2;

    ThzScaling scaling;
    CHECK(thz_scaling_for_scene(scene, &radio, &scaling));
    ThzTensor *scaled = NULL;
    CHECK(thz_scale(raw, scene, &scaling, &scaled));

    uint8_t *occ = malloc(rows * cols);
    uint8_t *sensed = malloc(rows * cols);
    CHECK(thz_scene_occupancy(scene, occ, rows * cols));
    CHECK(thz_sense_hard_vote(scaled, scaling.psi_max, sensed, rows * cols));
    for (size_t i = 0; i < rows * cols; i++) {
        if (occ[i] != sensed[i]) return 3;
    }

    double bound;
    CHECK(thz_hoeffding_bound(18, 0.4, &bound));
    if (bound < 0.69767 || bound > 0.69769) return 4;

    if (thz_hoeffding_bound(0, 0.4, &bound) != THZ_STATUS_INVALID_ARGUMENT) return 5;

    free(occ);
    free(sensed);
    thz_tensor_free(scaled);
    thz_tensor_free(raw);
    thz_scene_free(scene);
    printf("ok\n");
    return 0;
}
