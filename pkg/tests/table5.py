"""Published per-capacity bound values (four decimals, truncated), C = 3..47."""

CASE1 = {
    3: 0.9966, 4: 0.9672, 5: 0.9445, 6: 0.9302, 7: 0.9212, 8: 0.9153,
    9: 0.9114, 10: 0.9089, 11: 0.9073, 12: 0.9063, 13: 0.9057, 14: 0.9055,
    15: 0.9054, 16: 0.9056, 17: 0.9059, 18: 0.9063, 19: 0.9067, 20: 0.9073,
    21: 0.9078, 22: 0.9084, 23: 0.9090, 24: 0.9096, 25: 0.9102, 26: 0.9108,
    27: 0.9114, 28: 0.9121, 29: 0.9127, 30: 0.9133, 31: 0.9139, 32: 0.9145,
    33: 0.9151, 34: 0.9157, 35: 0.9162, 36: 0.9168, 37: 0.9174, 38: 0.9179,
    39: 0.9185, 40: 0.9190, 41: 0.9195, 42: 0.9200, 43: 0.9205, 44: 0.9210,
    45: 0.9215, 46: 0.9220, 47: 0.9225,
}

CASE2 = {
    3: 0.9562, 4: 0.9453, 5: 0.9377, 6: 0.9324, 7: 0.9286, 8: 0.9258,
    9: 0.9238, 10: 0.9223, 11: 0.9212, 12: 0.9204, 13: 0.9199, 14: 0.9196,
    15: 0.9194, 16: 0.9193, 17: 0.9194, 18: 0.9195, 19: 0.9196, 20: 0.9198,
    21: 0.9201, 22: 0.9204, 23: 0.9207, 24: 0.9210, 25: 0.9213, 26: 0.9217,
    27: 0.9221, 28: 0.9224, 29: 0.9228, 30: 0.9232, 31: 0.9236, 32: 0.9240,
    33: 0.9244, 34: 0.9247, 35: 0.9251, 36: 0.9255, 37: 0.9259, 38: 0.9263,
    39: 0.9266, 40: 0.9270, 41: 0.9274, 42: 0.9277, 43: 0.9281, 44: 0.9285,
    45: 0.9288, 46: 0.9292, 47: 0.9295,
}

BOX = {
    3: 0.9681, 4: 0.9600, 5: 0.9499, 6: 0.9388, 7: 0.9305, 8: 0.9247,
    9: 0.9199, 10: 0.9165, 11: 0.9127, 12: 0.9101, 13: 0.9082, 14: 0.9069,
    15: 0.9056, 16: 0.9049, 17: 0.9044, 18: 0.9043, 19: 0.9041, 20: 0.9042,
    21: 0.9045, 22: 0.9047, 23: 0.9051, 24: 0.9056, 25: 0.9060, 26: 0.9064,
    27: 0.9070, 28: 0.9076, 29: 0.9082, 30: 0.9087, 31: 0.9092, 32: 0.9097,
    33: 0.9103, 34: 0.9110, 35: 0.9116, 36: 0.9121, 37: 0.9126, 38: 0.9131,
    39: 0.9137, 40: 0.9143, 41: 0.9149, 42: 0.9155, 43: 0.9160, 44: 0.9165,
    45: 0.9169, 46: 0.9174, 47: 0.9179,
}
