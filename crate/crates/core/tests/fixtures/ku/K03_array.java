package demo.arrays;

public class Grid {
    private int[][] cells = new int[3][3];

    public int sumRow(int row) {
        int[] values = {1, 2, 3};
        int sum = values[0];
        String[] names = new String[4];
        return sum + cells[row][0] + names.length;
    }
}
