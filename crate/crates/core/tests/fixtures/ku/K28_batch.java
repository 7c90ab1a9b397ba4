package demo.batch;

import javax.batch.api.chunk.AbstractItemReader;
import javax.batch.api.chunk.ItemProcessor;

public class Reader extends AbstractItemReader {
    private ItemProcessor next;

    @Override
    public Object readItem() {
        return null;
    }
}
