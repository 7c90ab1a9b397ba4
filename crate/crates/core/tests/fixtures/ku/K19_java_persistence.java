package demo.jpa;

import javax.persistence.Entity;
import javax.persistence.EntityManager;
import javax.persistence.Id;
import javax.persistence.PersistenceContext;

@Entity
public class Customer {
    @Id
    private Long id;

    @PersistenceContext
    private EntityManager em;

    public long count() {
        return em.createQuery("select count(c) from Customer c", Long.class).getSingleResult();
    }
}
