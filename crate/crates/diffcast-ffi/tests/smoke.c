/* Minimal consumer of the generated header: checks that it compiles as C,
 * links against the library and that the basic contracts hold. */

#include "diffcast.h"

#include <assert.h>
#include <stdio.h>
#include <string.h>

int main(void) {
    assert(strlen(dc_version()) > 0);
    assert(strlen(dc_last_error()) == 0);

    double crps = -1.0;
    assert(dc_crps_gaussian(0.0, 1.0, 0.5, &crps) == DC_STATUS_OK);
    assert(crps > 0.0);

    double samples[4] = {1.25, 1.25, 1.25, 1.25};
    assert(dc_crps_empirical(samples, 4, 2.0, &crps) == DC_STATUS_OK);
    assert(crps == 0.75); /* point mass scores its absolute error */
    assert(dc_crps_empirical(NULL, 4, 2.0, &crps) == DC_STATUS_NULL_ARG);
    assert(dc_crps_empirical(samples, 0, 2.0, &crps) == DC_STATUS_CONFIG);

    DcModel *model = NULL;
    assert(dc_model_open("does-not-exist.json", NULL) == DC_STATUS_NULL_ARG);
    assert(dc_model_open("does-not-exist.json", &model) == DC_STATUS_DATA);
    assert(model == NULL);
    assert(strlen(dc_last_error()) > 0);

    dc_model_close(NULL);
    dc_string_free(NULL);

    printf("ok\n");
    return 0;
}
