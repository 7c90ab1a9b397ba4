package demo.rest;

import javax.ws.rs.GET;
import javax.ws.rs.Path;
import javax.ws.rs.PathParam;
import javax.ws.rs.Produces;

@Path("/items")
public class ItemResource {
    @GET
    @Path("{id}")
    @Produces("application/json")
    public String item(@PathParam("id") String id) {
        return id;
    }
}
