#include <stdio.h>
#include "htstep.h"

int main(void) {
    HtstepProblem *p = NULL;
    HtstepTensor *f = NULL;
    HtstepRunStats stats;
    char msg[256];

    if (htstep_problem_preset("fp2d-paper", 16, &p) != HTSTEP_STATUS_OK) {
        htstep_last_error(msg, sizeof msg);
        fprintf(stderr, "%s\n", msg);
        return 1;
    }
    if (htstep_integrate(p, "midpoint", 1e-3, 1e-2, NULL, 0, &f, &stats) != HTSTEP_STATUS_OK) {
        htstep_last_error(msg, sizeof msg);
        fprintf(stderr, "%s\n", msg);
        htstep_problem_free(p);
        return 1;
    }
    printf("htstep %s: %zu steps, max rank %zu, mass %.12f\n", htstep_version(), stats.steps, stats.max_rank,
           stats.final_mass);
    htstep_tensor_free(f);
    htstep_problem_free(p);
    return 0;
}
