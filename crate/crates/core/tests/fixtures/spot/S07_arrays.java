class Matrix {
    double[][] grid = new double[2][2];
    int[] row = {1, 2};
}
